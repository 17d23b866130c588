"""Tri-colorable honeycomb tori.

Sites come in two sublattices A and B on an R x C grid of unit cells.
B(i, j) connects to A(i, j) ("z" link), A(i+1, j) ("x" link) and
A(i, j+1) ("y" link). Hexagonal faces are indexed by cells; face (i, j)
carries color (i - j) mod 3 and every edge takes the color missing from
its two faces, which makes the edge tri-coloring proper (each vertex
touches one edge of each color).

A torus supports this coloring only if the number of faces is divisible
by 3 and the wrap-around preserves (i - j) mod 3. We therefore use R a
multiple of 3 for the i-wrap and a sheared j-wrap, identifying
(i, j + C) with (i + s, j) where s = (-C) mod 3. The requested lattice
parameter L maps to R = 3 * ceil(L / 3), C = L; for L a multiple of 3
this is the square L x L torus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Color indices; the measurement schedule refers to these.
RED, GREEN, BLUE = 0, 1, 2
COLOR_NAMES = ("red", "green", "blue")


@dataclass(frozen=True)
class Edge:
    a: int            # qubit index of first endpoint
    b: int            # qubit index of second endpoint
    color: int
    kind: str         # z | x | y (link direction, not the color)
    cell: tuple       # (i, j) of the defining cell


@dataclass(frozen=True)
class Plaquette:
    cell: tuple
    color: int
    edges: tuple      # 6 edge indices
    vertices: tuple   # 6 qubit indices


@dataclass
class HoneycombLattice:
    L: int
    R: int = field(init=False)
    C: int = field(init=False)
    shear: int = field(init=False)
    edges: list = field(init=False)
    plaquettes: list = field(init=False)

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("lattice parameter must be at least 2")
        self.R = 3 * math.ceil(self.L / 3)
        self.C = self.L
        self.shear = (-self.C) % 3
        self._build()

    # -- indexing ------------------------------------------------------

    def normalize(self, i, j):
        """Canonical cell for possibly out-of-range indices."""
        w, j = divmod(j, self.C)
        i = (i + self.shear * w) % self.R
        return i, j

    def site(self, sub, i, j):
        """Qubit index of A (sub=0) or B (sub=1) in cell (i, j)."""
        i, j = self.normalize(i, j)
        return 2 * (i * self.C + j) + sub

    @property
    def num_vertices(self):
        return 2 * self.R * self.C

    @property
    def num_edges(self):
        return 3 * self.R * self.C

    @property
    def num_plaquettes(self):
        return self.R * self.C

    def face_color(self, i, j):
        i, j = self.normalize(i, j)
        return (i - j) % 3

    # -- construction --------------------------------------------------

    def _build(self):
        edges = []
        index = {}
        for i in range(self.R):
            for j in range(self.C):
                c = (i - j) % 3
                b = self.site(1, i, j)
                for kind, other, color in (
                    ("z", self.site(0, i, j), (c + 1) % 3),
                    ("x", self.site(0, i + 1, j), c),
                    ("y", self.site(0, i, j + 1), (c + 2) % 3),
                ):
                    index[(kind, i, j)] = len(edges)
                    edges.append(Edge(a=min(b, other), b=max(b, other),
                                      color=color, kind=kind, cell=(i, j)))
        plaquettes = []
        for i in range(self.R):
            for j in range(self.C):
                boundary = tuple(index[(kind,) + self.normalize(ii, jj)] for kind, ii, jj in (
                    ("z", i, j),
                    ("y", i, j),
                    ("x", i - 1, j + 1),
                    ("z", i - 1, j + 1),
                    ("y", i - 1, j),
                    ("x", i - 1, j),
                ))
                vertices = tuple(self.site(*s) for s in (
                    (0, i, j), (1, i, j), (0, i, j + 1),
                    (1, i - 1, j + 1), (0, i - 1, j + 1), (1, i - 1, j),
                ))
                plaquettes.append(Plaquette(cell=(i, j), color=(i - j) % 3,
                                            edges=boundary, vertices=vertices))
        self.edges = edges
        self.plaquettes = plaquettes

    # -- structure checks ---------------------------------------------

    def check(self):
        """Raise AssertionError if the coloring or incidence is broken."""
        touch = {}
        for e in self.edges:
            for v in (e.a, e.b):
                touch.setdefault(v, []).append(e.color)
        if len(touch) != self.num_vertices:
            raise AssertionError("edge endpoints do not cover all vertices")
        for v, colors in touch.items():
            if sorted(colors) != [0, 1, 2]:
                raise AssertionError(f"vertex {v} touches colors {colors}")
        for p in self.plaquettes:
            ecolors = {self.edges[k].color for k in p.edges}
            if p.color in ecolors or len(ecolors) != 2:
                raise AssertionError(f"plaquette {p.cell} boundary colors {ecolors}")
            if len(set(p.vertices)) != 6:
                raise AssertionError(f"plaquette {p.cell} vertices not distinct")
        counts = [0, 0, 0]
        for e in self.edges:
            counts[e.color] += 1
        if len(set(counts)) != 1:
            raise AssertionError(f"unbalanced edge colors {counts}")

    def coordinates(self):
        """Approximate plane positions for plotting."""
        coords = {}
        for i in range(self.R):
            for j in range(self.C):
                x = 3.0 * j + 1.5 * i
                y = math.sqrt(3) * i
                coords[self.site(0, i, j)] = (x, y)
                coords[self.site(1, i, j)] = (x + 1.0, y + 0.5)
        return coords
