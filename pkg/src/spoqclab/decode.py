"""Detector error models, matching-graph decoding and erasure classification.

The DEM is extracted by propagating one error mechanism per frame column
through the circuit (frames engine), merging mechanisms with identical
symptoms, and splitting any mechanism that flips more than two detectors
into graphlike components. Decoding is minimum-weight perfect matching
over geodesics with weights ln((1-p)/p); heralded p=1/2 mechanisms give
weight-0 edges. A GF(2) rank computation classifies erasure-only
instances exactly.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .circuit import Circuit, Instruction
from . import frames


@dataclass(frozen=True)
class ErrorMechanism:
    p: float
    detectors: tuple    # sorted detector indices
    observables: tuple  # sorted observable indices

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("mechanism probability must lie in (0, 1)")


def _merge_p(p1, p2):
    return p1 * (1 - p2) + p2 * (1 - p1)


def _enumerate_components(circuit):
    """Yield (draw_key, row, p, label) per Pauli component of every error.

    draw_key indexes the plan.bernoulli call; DPH2 activation is draw k,
    its two half-bits are k+1 and k+2, and a component is expressed by
    which draws must fire: ZI -> (k, k+1), IZ -> (k, k+2), ZZ -> all.
    """
    draw = 0
    for inst in circuit.instructions:
        op = inst.opcode
        if op in ("X_ERROR", "Y_ERROR", "Z_ERROR"):
            p = inst.args[0]
            if p > 0:
                for i in range(len(inst.targets)):
                    yield ((draw, i),), p, (op, inst.targets[i])
            draw += 1
        elif op == "DPH2":
            p = inst.args[0]
            pairs = len(inst.targets) // 2
            if p > 0:
                for i in range(pairs):
                    a, b = inst.targets[2 * i], inst.targets[2 * i + 1]
                    yield ((draw, i), (draw + 1, i)), p / 4, ("ZI", a, b)
                    yield ((draw, i), (draw + 2, i)), p / 4, ("IZ", a, b)
                    yield ((draw, i), (draw + 1, i), (draw + 2, i)), p / 4, ("ZZ", a, b)
            draw += 3


def propagate_components(circuit):
    """Symptoms of every Pauli error component, one frame column each.

    Returns a list of (p, det_index_tuple, obs_index_tuple, label).
    """
    comps = list(_enumerate_components(circuit))
    ncols = len(comps)
    words = max(1, -(-ncols // 64))
    table = {}
    for col, (draws, _p, _label) in enumerate(comps):
        for key, row in draws:
            mat = table.setdefault(key, {})
            mat.setdefault(row, []).append(col)
    # Convert to the plan's draw_key -> (rows, words) packed masks. Rows
    # counts differ per instruction; build lazily with a dict wrapper.
    packed = {}
    for key, rows in table.items():
        nrows = max(rows) + 1
        m = np.zeros((nrows, words), dtype=np.uint64)
        for r, cols in rows.items():
            for c in cols:
                m[r, c // 64] |= np.uint64(1 << (c % 64))
        packed[key] = m

    class _Plan:
        def __init__(self):
            self.draw = 0

        def bernoulli(self, p, nrows):
            got = packed.get(self.draw)
            self.draw += 1
            if got is None:
                return np.zeros((nrows, words), dtype=np.uint64)
            if got.shape[0] < nrows:
                pad = np.zeros((nrows - got.shape[0], words), dtype=np.uint64)
                return np.vstack([got, pad])
            return got

    _, det, obs = frames.propagate(circuit, words, _Plan())
    out = []
    for col, (draws, p, label) in enumerate(comps):
        w, b = col // 64, np.uint64(1 << (col % 64))
        dets = tuple(int(i) for i in range(det.shape[0]) if det[i, w] & b)
        obss = tuple(int(i) for i in range(obs.shape[0]) if obs[i, w] & b)
        out.append((p, dets, obss, label))
    return out


def build_dem(circuit):
    """Extract the graphlike detector error model of an instance circuit.

    Raises ValueError if a mechanism flipping more than two detectors
    cannot be decomposed against the graphlike mechanisms present.
    """
    merged = {}
    pending = []
    for p, dets, obss, _label in propagate_components(circuit):
        if not dets and not obss:
            continue
        if len(dets) <= 2:
            key = (dets, obss)
            merged[key] = _merge_p(merged.get(key, 0.0), p)
        else:
            pending.append((p, dets, obss))
    for p, dets, obss in pending:
        for key in _split_graphlike(dets, obss, merged):
            merged[key] = _merge_p(merged.get(key, 0.0), p)
    mechanisms = [ErrorMechanism(p, dets, obss)
                  for (dets, obss), p in merged.items() if 0.0 < p < 1.0]
    mechanisms.sort(key=lambda m: (m.detectors, m.observables))
    return mechanisms


def _split_graphlike(dets, obss, merged):
    """Split a hyperedge symptom into graphlike pieces present in merged."""
    rem_d = set(dets)
    rem_o = set(obss)
    parts = []
    keys = sorted(merged, key=lambda k: (-len(k[0]), k))
    progress = True
    while len(rem_d) > 2 and progress:
        progress = False
        for kd, ko in keys:
            if kd and set(kd) <= rem_d and len(kd) == 2:
                rem_d -= set(kd)
                rem_o ^= set(ko)
                parts.append((kd, ko))
                progress = True
                break
    if len(rem_d) > 2:
        raise ValueError(f"cannot decompose hyperedge with detectors {sorted(dets)}")
    if rem_d or rem_o:
        parts.append((tuple(sorted(rem_d)), tuple(sorted(rem_o))))
    return parts


# -- DEM text format ----------------------------------------------------

def dem_to_text(mechanisms):
    lines = []
    for m in mechanisms:
        parts = [f"error({m.p:.17g})"]
        parts += [f"D{i}" for i in m.detectors]
        parts += [f"L{i}" for i in m.observables]
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def dem_from_text(text):
    mechanisms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *targets = line.split()
        if not head.startswith("error(") or not head.endswith(")"):
            raise ValueError(f"line {lineno}: expected error(p), got {head!r}")
        p = float(head[6:-1])
        dets = tuple(sorted(int(t[1:]) for t in targets if t.startswith("D")))
        obss = tuple(sorted(int(t[1:]) for t in targets if t.startswith("L")))
        if len(dets) + len(obss) != len(targets):
            raise ValueError(f"line {lineno}: bad target in {targets}")
        mechanisms.append(ErrorMechanism(p, dets, obss))
    return mechanisms


# -- matching graph -----------------------------------------------------

@dataclass
class MatchingGraph:
    num_detectors: int
    boundary: int | None                  # virtual node index or None
    edges: list                           # (u, v, weight, obs_mask, edge_id)
    _dist: np.ndarray = field(default=None, repr=False)
    _pred: np.ndarray = field(default=None, repr=False)
    _edge_lookup: dict = field(default=None, repr=False)

    @property
    def num_nodes(self):
        return self.num_detectors + (1 if self.boundary is not None else 0)

    def prepare(self):
        """All-pairs geodesics (distances + predecessors), cached."""
        if self._dist is not None:
            return
        n = self.num_nodes
        rows, cols, vals = [], [], []
        lookup = {}
        for u, v, w, mask, eid in self.edges:
            key = (min(u, v), max(u, v))
            best = lookup.get(key)
            if best is None or (w, eid) < (best[0], best[2]):
                lookup[key] = (w, mask, eid)
        for (u, v), (w, mask, eid) in lookup.items():
            rows += [u, v]
            cols += [v, u]
            vals += [w, w]
        g = csr_matrix((vals, (rows, cols)), shape=(n, n))
        dist, pred = dijkstra(g, directed=False, return_predecessors=True)
        self._dist = dist
        self._pred = pred
        self._edge_lookup = lookup

    def path_mask(self, u, v):
        """Observable mask along the geodesic from u to v."""
        self.prepare()
        mask = 0
        cur = v
        while cur != u:
            prev = int(self._pred[u, cur])
            if prev < 0:
                raise ValueError(f"nodes {u} and {v} are disconnected")
            key = (min(prev, cur), max(prev, cur))
            mask ^= self._edge_lookup[key][1]
            cur = prev
        return mask


def build_matching_graph(mechanisms, num_detectors=None):
    if num_detectors is None:
        num_detectors = max((max(m.detectors) for m in mechanisms if m.detectors),
                            default=-1) + 1
    needs_boundary = any(len(m.detectors) == 1 for m in mechanisms)
    boundary = num_detectors if needs_boundary else None
    edges = []
    for eid, m in enumerate(mechanisms):
        if not m.detectors:
            continue
        if not 0.0 < m.p < 1.0:
            raise ValueError("edge probability out of (0, 1)")
        w = math.log((1 - m.p) / m.p)
        mask = 0
        for k in m.observables:
            mask |= 1 << k
        if len(m.detectors) == 1:
            edges.append((m.detectors[0], boundary, w, mask, eid))
        elif len(m.detectors) == 2:
            edges.append((m.detectors[0], m.detectors[1], w, mask, eid))
        else:
            raise ValueError("matching graph requires a graphlike DEM")
    return MatchingGraph(num_detectors=num_detectors, boundary=boundary, edges=edges)


def _min_weight_pairing(dist):
    """Exact minimum-weight perfect matching of a small complete graph.

    dist is a (k, k) symmetric cost matrix with even k. Bitmask dynamic
    program, O(k^2 2^k); falls back to a blossom solver for large k.
    """
    k = dist.shape[0]
    if k == 0:
        return []
    if k % 2:
        raise ValueError("odd number of defects cannot be paired")
    if k > 10:
        # The bitmask DP scales as k^2 2^k; the blossom solver overtakes
        # it at about a dozen defects.
        import networkx as nx

        g = nx.Graph()
        for i in range(k):
            for j in range(i + 1, k):
                g.add_edge(i, j, weight=float(dist[i, j]))
        pairs = nx.min_weight_matching(g)
        return sorted(tuple(sorted(p)) for p in pairs)
    full = (1 << k) - 1
    best = np.full(1 << k, np.inf)
    choice = np.full(1 << k, -1, dtype=np.int64)
    best[0] = 0.0
    for mask in range(1, 1 << k):
        if bin(mask).count("1") % 2:
            continue
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        m = rest
        while m:
            j = (m & -m).bit_length() - 1
            prev = rest & ~(1 << j)
            cand = best[prev] + dist[i, j]
            if cand < best[mask]:
                best[mask] = cand
                choice[mask] = j
            m &= m - 1
    pairs = []
    mask = full
    while mask:
        i = (mask & -mask).bit_length() - 1
        j = int(choice[mask])
        pairs.append((i, j))
        mask &= ~((1 << i) | (1 << j))
    return sorted(tuple(sorted(p)) for p in pairs)


def mwpm_decode(graph, syndrome):
    """Decode one shot; returns (paired defect tuples, predicted obs mask).

    syndrome is an iterable of flipped detector indices.
    """
    graph.prepare()
    defects = sorted(set(syndrome))
    if not defects:
        return [], 0
    if len(defects) % 2:
        if graph.boundary is None:
            raise ValueError("odd defect count without a boundary node")
        defects.append(graph.boundary)
    idx = np.array(defects)
    dist = graph._dist[np.ix_(idx, idx)]
    if not np.all(np.isfinite(dist)):
        # Disconnected components: pair within components by grouping.
        return _decode_components(graph, defects)
    pairs = _min_weight_pairing(dist)
    mask = 0
    out = []
    for i, j in pairs:
        u, v = defects[i], defects[j]
        mask ^= graph.path_mask(u, v)
        out.append((u, v))
    return out, mask


def _decode_components(graph, defects):
    comp = {}
    for v in defects:
        root = min(u for u in defects if np.isfinite(graph._dist[u, v]))
        comp.setdefault(root, []).append(v)
    mask = 0
    out = []
    for group in comp.values():
        if len(group) % 2:
            raise ValueError("odd defect count in a connected component")
        idx = np.array(group)
        dist = graph._dist[np.ix_(idx, idx)]
        for i, j in _min_weight_pairing(dist):
            u, v = group[i], group[j]
            mask ^= graph.path_mask(u, v)
            out.append((u, v))
    return out, mask


# -- erasure classification --------------------------------------------

def rank_classify(rows, num_detectors):
    """GF(2) analysis of heralded mechanisms.

    rows are integers with detector bits 0..D-1 and the observable at bit
    D. Returns 0.5 if some combination has empty syndrome but flips the
    observable (the decoder must guess), else 0.0.
    """
    obs_bit = 1 << num_detectors
    pivots = {}
    for row in rows:
        r = row
        while r:
            low = r & ~obs_bit
            if low == 0:
                if r & obs_bit:
                    return 0.5
                break
            piv = low.bit_length() - 1
            if piv in pivots:
                r ^= pivots[piv]
            else:
                pivots[piv] = r
                break
    return 0.0


def herald_rows(circuit, observable=0):
    """Symptom rows of all p=1/2 error components of an instance circuit."""
    rows = []
    for p, dets, obss, _label in propagate_components(circuit):
        if p != 0.5:
            continue
        r = 0
        for d in dets:
            r |= 1 << d
        if observable in obss:
            r |= 1 << circuit.num_detectors
        rows.append(r)
    return rows


def classify_erasure_instance(instance, observable=0):
    """Exact logical error rate of an erasure-only instance: 0 or 1/2."""
    c = instance.lowered
    return rank_classify(herald_rows(c, observable), c.num_detectors)


# -- distance -----------------------------------------------------------

def _min_cycle_pattern(mechanisms, combo):
    """Minimal undetectable mechanism set flipping a combination.

    ``combo`` is a bitmask over observable indices. Returns (weight,
    pattern) where pattern is the bitmask of observables flipped by the
    minimal set, or (None, None) if no such set exists.
    """
    def pattern_of(m):
        p = 0
        for i in m.observables:
            p |= 1 << i
        return p

    for m in mechanisms:
        if not m.detectors:
            p = pattern_of(m)
            if bin(p & combo).count("1") % 2:
                return 1, p
    boundary = -1
    adj = {}
    for m in mechanisms:
        p = pattern_of(m)
        par = bin(p & combo).count("1") % 2
        if len(m.detectors) == 2:
            u, v = m.detectors
        elif len(m.detectors) == 1:
            u, v = m.detectors[0], boundary
        else:
            continue
        adj.setdefault(u, []).append((v, par, p))
        adj.setdefault(v, []).append((u, par, p))
    best_w = None
    best_p = None
    for s in sorted(adj):
        dist = {(s, 0): (0, None, 0)}
        queue = deque([(s, 0)])
        while queue:
            u, pu = queue.popleft()
            du = dist[(u, pu)][0]
            if best_w is not None and du + 1 >= best_w:
                continue
            for v, par, p in adj[u]:
                key = (v, pu ^ par)
                if key not in dist:
                    dist[key] = (du + 1, (u, pu), p)
                    queue.append(key)
        if (s, 1) in dist:
            w = dist[(s, 1)][0]
            if best_w is None or w < best_w:
                pat = 0
                cur = (s, 1)
                while dist[cur][1] is not None:
                    pat ^= dist[cur][2]
                    cur = dist[cur][1]
                best_w, best_p = w, pat
    return best_w, best_p


def _solution_basis(constraints, width):
    """Basis of {x : |x & o| even for all o}, ascending and deterministic."""
    rows = []
    for o in constraints:
        r = o
        for piv, row in rows:
            if r >> piv & 1:
                r ^= row
        if r:
            piv = r.bit_length() - 1
            rows = [(p, w ^ r if w >> piv & 1 else w) for p, w in rows]
            rows.append((piv, r))
    pivot_bits = {piv for piv, _ in rows}
    basis = []
    for free in range(width):
        if free in pivot_bits:
            continue
        x = 1 << free
        for piv, row in rows:
            if row >> free & 1:
                x ^= 1 << piv
        basis.append(x)
    return sorted(basis)


def protected_combination(mechanisms, num_observables):
    """Most fault-distant combination of annotated observables.

    Iteratively finds the minimal undetectable cycle breaking some
    remaining combination and restricts to combinations that cycle leaves
    invariant, until one dimension survives. Returns (bitmask, distance).
    """
    constraints = []
    while True:
        basis = _solution_basis(constraints, num_observables)
        if not basis:
            raise RuntimeError("no protected observable combination")
        scored = []
        for c in basis:
            w, o = _min_cycle_pattern(mechanisms, c)
            if o is None:
                scored.append((float("inf"), c, None))
            else:
                scored.append((w, c, o))
        scored.sort(key=lambda t: (t[0], t[1]))
        w, c, o = scored[0]
        if len(basis) == 1 or o is None:
            return c, (int(w) if w != float("inf") else 0)
        constraints.append(o)


def estimate_graph_distance(mechanisms, observable=0):
    """Minimum mechanisms forming an undetectable observable flip.

    Parity-aware shortest cycle: double every node into even/odd copies
    of the observable crossing parity; an edge with odd mask connects
    opposite copies. The distance is the shortest closed walk returning
    to a start node with odd parity (through the boundary if present).
    """
    graph = build_matching_graph(mechanisms)
    n = graph.num_nodes
    rows, cols, vals = [], [], []
    bit = 1 << observable

    def add(u, v, w):
        rows.append(u)
        cols.append(v)
        vals.append(w)

    for u, v, _w, mask, _eid in graph.edges:
        flip = 1 if (mask & bit) else 0
        for s in (0, 1):
            add(u + s * n, v + ((s + flip) % 2) * n, 1.0)
            add(v + ((s + flip) % 2) * n, u + s * n, 1.0)
    # Mechanisms with no detectors but odd observable are distance 1.
    if any(not m.detectors and (observable in m.observables) for m in mechanisms):
        return 1
    if not rows:
        return 0
    g = csr_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n))
    dist = dijkstra(g, directed=True, indices=range(n))
    best = np.inf
    for v in range(n):
        best = min(best, dist[v, v + n])
    return int(best) if np.isfinite(best) else 0
