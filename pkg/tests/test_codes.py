"""Memory-circuit builders: certification, distances, resource counts."""

import numpy as np
import pytest

from spoqclab import frames
from spoqclab.circuit import Circuit, Instruction
from spoqclab.codes import CodeSpec, build_code, resource_count
from spoqclab.lattice import HoneycombLattice
from spoqclab.noise import lower_ideal
from spoqclab.tableau import run as tableau_run

HC_SPECS = [CodeSpec("honeycomb", L, flavor=f)
            for L in (2, 3, 4) for f in ("SPOQC2", "SPOQC")]
SC_SPECS = [CodeSpec("surface", d, flavor="SPOQC") for d in (3, 5)]
ALL_SPECS = HC_SPECS + SC_SPECS


def _ids(specs):
    return [f"{s.family}-{s.size}-{s.flavor}" for s in specs]


@pytest.mark.parametrize("bad", [
    dict(family="surface", size=4),
    dict(family="surface", size=3, flavor="SPOQC2"),
    dict(family="honeycomb", size=1),
    dict(family="honeycomb", size=2, rounds=12),
    dict(family="honeycomb", size=2, rounds=6),
    dict(family="triangular", size=3),
])
def test_spec_validation(bad):
    with pytest.raises(ValueError):
        CodeSpec(**bad)


def test_honeycomb_default_rounds_follow_size():
    for L in (2, 3, 5):
        assert CodeSpec("honeycomb", L).rounds == 6 * L + 1


@pytest.mark.parametrize("spec", ALL_SPECS, ids=_ids(ALL_SPECS))
def test_noiseless_tableau_shots_are_quiet(spec):
    res = build_code(spec)
    instance = lower_ideal(res.circuit)
    for seed in range(5):
        out = tableau_run(instance, seed=seed)
        assert all(d == 0 for d in out.detectors)
        assert out.observables[0] == res.observable_const


@pytest.mark.parametrize("spec", ALL_SPECS, ids=_ids(ALL_SPECS))
def test_noiseless_frames_are_quiet(spec):
    res = build_code(spec)
    instance = lower_ideal(res.circuit)
    det, obs = frames.sample(instance, shots=64, seed=7)
    assert not det.any()
    assert not obs.any()


@pytest.mark.parametrize("spec", ALL_SPECS, ids=_ids(ALL_SPECS))
def test_build_summary(spec):
    res = build_code(spec)
    assert res.observable_const == 0
    assert res.observable
    assert len(res.detectors) >= 1
    # Detectors are GF(2) independent record sets.
    pivots = {}
    for det in res.detectors:
        m = 0
        for r in det:
            m |= 1 << r
        while m:
            piv = m.bit_length() - 1
            if piv not in pivots:
                pivots[piv] = m
                break
            m ^= pivots[piv]
        assert m != 0
    if spec.family == "honeycomb":
        assert len(res.observable_classes) == 2
        assert res.num_data == HoneycombLattice(spec.size).num_vertices
    else:
        assert len(res.observable_classes) == 1
        assert res.num_data == spec.size ** 2


@pytest.mark.parametrize("spec", SC_SPECS, ids=_ids(SC_SPECS))
def test_surface_distance_matches_parameter(spec):
    assert build_code(spec).distance == spec.size


def test_honeycomb_distances():
    dists = {L: build_code(CodeSpec("honeycomb", L)).distance for L in (2, 3, 4)}
    assert dists[2] >= 3 and dists[3] >= 3
    assert dists[2] <= dists[3] <= dists[4]
    assert dists[4] > dists[2]


@pytest.mark.parametrize("L", [2, 3, 4])
def test_flavors_share_record_structure(L):
    a = build_code(CodeSpec("honeycomb", L, flavor="SPOQC2"))
    b = build_code(CodeSpec("honeycomb", L, flavor="SPOQC"))
    assert a.num_records == b.num_records
    assert a.detectors == b.detectors
    assert a.observable == b.observable


def _inject(instance, tick_index, opcode, qubit):
    out = Circuit(coordinates=dict(instance.coordinates))
    ticks = 0
    for inst in instance.instructions:
        if inst.opcode == "TICK":
            if ticks == tick_index:
                out.instructions.append(
                    Instruction(opcode, args=(1.0,), targets=(qubit,)))
            ticks += 1
        out.instructions.append(inst)
    return out


@pytest.mark.parametrize("spec", [
    CodeSpec("honeycomb", 2, flavor="SPOQC2"),
    CodeSpec("honeycomb", 2, flavor="SPOQC"),
    CodeSpec("surface", 3, flavor="SPOQC"),
], ids=["hc2-spoqc2", "hc2-spoqc", "sc3"])
def test_single_error_frames_match_tableau(spec):
    """Deterministic single-error insertions: frame flips equal tableau bits."""
    res = build_code(spec)
    instance = lower_ideal(res.circuit)
    num_ticks = sum(1 for i in instance.instructions if i.opcode == "TICK")
    rng = np.random.default_rng(11)
    for _ in range(25):
        tick = int(rng.integers(num_ticks))
        qubit = int(rng.integers(instance.qubit_count))
        opcode = ["X_ERROR", "Y_ERROR", "Z_ERROR"][int(rng.integers(3))]
        faulty = _inject(instance, tick, opcode, qubit)
        out = tableau_run(faulty, seed=3)
        det, obs = frames.sample(faulty, shots=1, seed=3)
        det_bits = frames.unpack(det, 1)[:, 0] if det.size else []
        obs_bits = frames.unpack(obs, 1)[:, 0]
        assert list(det_bits) == list(out.detectors)
        assert obs_bits[0] ^ res.observable_const == out.observables[0]


@pytest.mark.parametrize("L", range(2, 11))
def test_resource_counts(L):
    lat = HoneycombLattice(L)
    spins2, mods2 = resource_count(CodeSpec("honeycomb", L, flavor="SPOQC2"))
    spins1, mods1 = resource_count(CodeSpec("honeycomb", L, flavor="SPOQC"))
    assert (spins2, mods2) == (lat.num_vertices, lat.num_edges)
    assert (spins1, mods1) == (lat.num_vertices + lat.num_edges, 2 * lat.num_edges)
    assert mods1 == 2 * mods2
    # Spin reduction from removing the photonic ancillas is exactly 60%.
    assert 5 * spins2 == 2 * spins1


def test_resource_count_rejects_surface():
    with pytest.raises(ValueError):
        resource_count(CodeSpec("surface", 3, flavor="SPOQC"))


def test_builds_are_deterministic():
    spec = CodeSpec("honeycomb", 2)
    a = build_code(spec)
    build_code.cache_clear()
    b = build_code(spec)
    assert a.observable == b.observable
    assert a.detectors == b.detectors
    assert a.distance == b.distance
