"""Structural invariants of the honeycomb torus lattice."""

import collections

import pytest

from spoqclab.lattice import RED, GREEN, BLUE, HoneycombLattice


@pytest.mark.parametrize("L", range(2, 8))
def test_internal_checks_pass(L):
    HoneycombLattice(L).check()


@pytest.mark.parametrize("L", range(2, 8))
def test_counts(L):
    lat = HoneycombLattice(L)
    cells = lat.R * lat.C
    assert lat.num_vertices == 2 * cells
    assert lat.num_edges == 3 * cells
    assert len(lat.plaquettes) == cells
    assert lat.R % 3 == 0 and lat.R >= L
    assert lat.C == L


def test_size_three_is_the_plain_torus():
    lat = HoneycombLattice(3)
    assert (lat.num_vertices, lat.num_edges, len(lat.plaquettes)) == (18, 27, 9)


@pytest.mark.parametrize("L", range(2, 8))
def test_every_vertex_has_one_edge_per_color(L):
    lat = HoneycombLattice(L)
    incident = collections.defaultdict(list)
    for e in lat.edges:
        incident[e.a].append(e.color)
        incident[e.b].append(e.color)
    assert set(incident) == set(range(lat.num_vertices))
    for colors in incident.values():
        assert sorted(colors) == [RED, GREEN, BLUE]


@pytest.mark.parametrize("L", range(2, 8))
def test_color_balance(L):
    lat = HoneycombLattice(L)
    edge_colors = collections.Counter(e.color for e in lat.edges)
    face_colors = collections.Counter(p.color for p in lat.plaquettes)
    assert set(edge_colors.values()) == {lat.num_edges // 3}
    assert set(face_colors.values()) == {len(lat.plaquettes) // 3}


@pytest.mark.parametrize("L", range(2, 8))
def test_plaquette_structure(L):
    lat = HoneycombLattice(L)
    edge_use = collections.Counter()
    for p in lat.plaquettes:
        assert len(p.edges) == 6
        assert len(set(p.vertices)) == 6
        for i in p.edges:
            e = lat.edges[i]
            assert e.color != p.color
            assert e.a in p.vertices and e.b in p.vertices
            edge_use[i] += 1
    # Every edge borders exactly the two plaquettes of the other colors.
    assert set(edge_use.values()) == {2}
    for p in lat.plaquettes:
        boundary_colors = {lat.edges[i].color for i in p.edges}
        assert boundary_colors == {RED, GREEN, BLUE} - {p.color}


@pytest.mark.parametrize("L", range(2, 8))
def test_coordinates_distinct(L):
    lat = HoneycombLattice(L)
    coords = lat.coordinates()
    assert len(coords) == lat.num_vertices
    assert len(set(coords.values())) == lat.num_vertices
