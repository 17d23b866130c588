"""End-to-end acceptance checks: physics oracles, certification of every
builder output, decoder agreement, headline thresholds, and determinism."""

import dataclasses
import math
import time

import numpy as np
import pytest

from spoqclab import experiments, frames
from spoqclab.circuit import Circuit, Instruction
from spoqclab.codes import CodeSpec, build_code, resource_count
from spoqclab.decode import classify_erasure_instance
from spoqclab.lattice import HoneycombLattice
from spoqclab.noise import (NoiseModel, effective_channel, lower_ideal,
                            lower_with_coins, rus_sites)
from spoqclab.optics import SpinPairState, amplitude_table, rus_probabilities
from spoqclab.tableau import run as tableau_run

ALL_SPECS = [CodeSpec("honeycomb", L, flavor=f)
             for L in (2, 3, 4) for f in ("SPOQC2", "SPOQC")] + \
            [CodeSpec("surface", d, flavor="SPOQC") for d in (3, 5)]
_IDS = [f"{s.family[:2]}{s.size}-{s.flavor.lower()}" for s in ALL_SPECS]


# -- interferometer and analytic channel oracles ------------------------

def _reference_rows(phi):
    """Two-photon detection-pattern coefficients of the erasure gadget."""
    e = np.exp(1j * phi)
    return {
        (0, 0): (1, -1, 1, -1),
        (1, 1): (-1, 1, -1, 1),
        (2, 2): (e, e, -e, -e),
        (3, 3): (-e, -e, e, e),
        (0, 2): (1 + e, 1 - e, 1 - e, 1 + e),
        (0, 3): (1 - e, 1 + e, 1 + e, 1 - e),
        (1, 2): (1 - e, 1 + e, 1 + e, 1 - e),
        (1, 3): (1 + e, 1 - e, 1 - e, 1 + e),
    }


def test_amplitude_table_reproduces_reference_rows():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    for phi in (0.0, math.pi / 2, 1.3):
        ref = _reference_rows(phi)
        for _ in range(10):
            v = rng.normal(size=4) + 1j * rng.normal(size=4)
            a = v[:2] / np.linalg.norm(v[:2])
            b = v[2:] / np.linalg.norm(v[2:])
            s = SpinPairState(a[0], a[1], b[0], b[1])
            spin_amp = np.array([s.alpha * s.gamma, s.alpha * s.delta,
                                 s.beta * s.gamma, s.beta * s.delta])
            table = amplitude_table(s, phi)
            for pattern, expect in ref.items():
                bare = table[pattern] / spin_amp
                expect = np.array(expect, dtype=complex)
                k = int(np.argmax(np.abs(expect)))
                phase = bare[k] / expect[k]
                assert abs(abs(phase) - 1) < 1e-9
                assert np.abs(bare - phase * expect).max() < 1e-9
    assert time.perf_counter() - start < 1.0


def test_rus_failure_probability_values():
    low = rus_probabilities(0.028)
    high = rus_probabilities(0.064)
    assert 0.1045 <= low.p_rus <= 0.1048
    assert 0.2203 <= high.p_rus <= 0.2207
    for p in (low, high):
        # Summed geometric series of repeat outcomes equals the closed form.
        series = p.p_e * sum(p.p_r ** k for k in range(200))
        assert abs(p.p_rus - series) < 1e-12
        assert abs(p.p_s + p.p_r + p.p_e - 1.0) < 1e-12


def test_erased_cz_equals_dephasing_alone():
    cz = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
    rng = np.random.default_rng(2)
    channel = effective_channel("RUS_CZ", erased=True)
    for _ in range(100):
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        dephased = channel(rho)
        diff = cz @ dephased @ cz.conj().T - dephased
        assert 0.5 * np.abs(np.linalg.eigvalsh(diff)).sum() < 1e-12


# -- certification of every builder output ------------------------------

@pytest.mark.parametrize("spec", ALL_SPECS, ids=_IDS)
def test_noiseless_shots_are_deterministic(spec):
    res = build_code(spec)
    instance = lower_ideal(res.circuit)
    for seed in range(1000):
        out = tableau_run(instance, seed=seed)
        assert not any(out.detectors)
        assert out.observables[0] == res.observable_const


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


@pytest.mark.parametrize("spec", ALL_SPECS, ids=_IDS)
def test_single_error_frames_match_tableau(spec):
    res = build_code(spec)
    instance = lower_ideal(res.circuit)
    num_ticks = sum(1 for i in instance.instructions if i.opcode == "TICK")
    rng = np.random.default_rng(17)
    for _ in range(1000):
        tick = int(rng.integers(num_ticks))
        qubit = int(rng.integers(instance.qubit_count))
        opcode = ["X_ERROR", "Y_ERROR", "Z_ERROR"][int(rng.integers(3))]
        faulty = _inject(instance, tick, opcode, qubit)
        out = tableau_run(faulty, seed=3)
        det, obs = frames.sample(faulty, shots=1, seed=3)
        det_bits = frames.unpack(det, 1)[:, 0]
        obs_bits = frames.unpack(obs, 1)[:, 0]
        assert list(det_bits) == list(out.detectors)
        assert obs_bits[0] ^ res.observable_const == out.observables[0]


# -- erasure classification vs matching decoder -------------------------

def test_erasure_classifier_agrees_with_matching_decoder():
    """Instances classified correctable decode perfectly; instances
    classified random have near-half shot error."""
    spec = CodeSpec("honeycomb", 3)
    circuit = build_code(spec).circuit
    num_sites = len(rus_sites(circuit))
    shots = 256
    labels = experiments.classify_instances(spec, 0.15, seed=505,
                                            start=0, stop=1000)
    halves = 0
    for m in range(1000):
        coins = np.random.default_rng([505, m]).random(num_sites) < 0.15
        inst = lower_with_coins(circuit, coins)
        errors = experiments.mwpm_shot_errors(inst, shots, seed=m)
        if labels[m] == 0.0:
            assert errors == 0
        else:
            halves += 1
            assert 0.3 <= errors / shots <= 0.7
    assert halves >= 1


@pytest.mark.parametrize("flavor", ["SPOQC2", "SPOQC"])
def test_every_single_erasure_is_correctable(flavor):
    circuit = build_code(CodeSpec("honeycomb", 3, flavor=flavor)).circuit
    n = len(rus_sites(circuit))
    for k in range(n):
        coins = np.zeros(n, dtype=bool)
        coins[k] = True
        assert classify_erasure_instance(lower_with_coins(circuit, coins)) == 0.0


# -- headline thresholds ------------------------------------------------

HEADLINE = experiments.SweepConfig(
    family="honeycomb", flavor="SPOQC2", sizes=(2, 3, 4),
    noise_axis="erasure",
    p_grid=(0.14, 0.16, 0.18, 0.20, 0.22, 0.24, 0.26, 0.28, 0.30),
    M=2000, N=64, K=10_000, seed=7)


@pytest.fixture(scope="module")
def headline_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("headline")
    config = dataclasses.replace(HEADLINE, out_dir=str(out))
    start = time.perf_counter()
    points, fit, paths = experiments.run_and_report(config, workers=1)
    elapsed = time.perf_counter() - start
    return config, points, fit, paths, elapsed


def test_erasure_threshold_native_pairs(headline_run):
    _config, _points, fit, _paths, elapsed = headline_run
    assert 0.19 <= fit.threshold <= 0.25
    assert elapsed <= 30 * 60


def _erasure_fit(family, flavor, sizes, grid):
    config = experiments.SweepConfig(
        family=family, flavor=flavor, sizes=sizes, noise_axis="erasure",
        p_grid=grid, M=2000, N=64, K=10_000, seed=7)
    points = experiments.run_sweep(config, workers=1)
    return experiments.fit_threshold(points, K=config.K, seed=config.seed)


def test_architecture_ordering(headline_run):
    _config, _points, native, _paths, _elapsed = headline_run
    ancilla = _erasure_fit("honeycomb", "SPOQC", (2, 3, 4),
                           (0.03, 0.04, 0.05, 0.06, 0.07,
                            0.08, 0.09, 0.10, 0.11))
    surface = _erasure_fit("surface", "SPOQC", (3, 5),
                           (0.06, 0.0725, 0.085, 0.0975, 0.11,
                            0.1225, 0.135, 0.1475, 0.16))
    assert native.threshold >= 2 * ancilla.threshold
    assert native.threshold > surface.threshold


@pytest.mark.parametrize("axis", ["decoherence", "distinguishability"])
def test_pauli_noise_crossings(axis):
    config = experiments.SweepConfig(
        family="honeycomb", flavor="SPOQC2", sizes=(2, 4), noise_axis=axis,
        p_grid=(0.010, 0.014, 0.018, 0.022, 0.026, 0.030, 0.034),
        M=1, N=10_000, K=10_000, seed=11)
    start = time.perf_counter()
    points = experiments.run_sweep(config, workers=1)
    fit = experiments.fit_threshold(points, K=config.K, seed=config.seed)
    elapsed = time.perf_counter() - start
    assert 0.015 <= fit.threshold <= 0.030
    assert elapsed <= 15 * 60


# -- resource accounting ------------------------------------------------

@pytest.mark.parametrize("L", range(2, 11))
def test_resource_savings_exact(L):
    lat = HoneycombLattice(L)
    spins2, mods2 = resource_count(CodeSpec("honeycomb", L, flavor="SPOQC2"))
    spins1, mods1 = resource_count(CodeSpec("honeycomb", L, flavor="SPOQC"))
    assert (spins2, mods2) == (lat.num_vertices, lat.num_edges)
    assert mods1 == 2 * mods2                 # native pairs halve the modules
    assert 5 * spins2 == 2 * spins1           # exactly 60% fewer spins


# -- fit oracle and determinism -----------------------------------------

@pytest.mark.parametrize("case", range(20))
def test_fit_recovers_synthetic_crossing(case):
    rng = np.random.default_rng(900 + case)
    crossing = float(rng.uniform(0.10, 0.25))
    height = float(rng.uniform(0.03, 0.10))
    slope_s = float(rng.uniform(0.4, 0.9))
    slope_l = slope_s * float(rng.uniform(1.8, 3.5))
    grid = np.linspace(crossing - 0.06, crossing + 0.06, 9)
    half = 0.01
    points = []
    for size, slope in ((3, slope_s), (5, slope_l)):
        for p in grid:
            eps = height + slope * (p - crossing) + rng.normal(0, half / 3.3)
            points.append(experiments.PointEstimate(
                p=float(p), size=size, instances=1, shots=10 ** 4,
                epsilon=eps, variance=0.0, ci=(eps - half, eps + half)))
    fit = experiments.fit_threshold(points, K=2000, seed=case)
    assert abs(fit.threshold - crossing) <= 3 * fit.std


def test_reports_identical_across_worker_counts(headline_run, tmp_path):
    config, _points, _fit, paths, _elapsed = headline_run
    rerun = dataclasses.replace(config, out_dir=str(tmp_path))
    _p, _f, paths2 = experiments.run_and_report(rerun, workers=2)
    for a, b in zip(paths[:2], paths2[:2]):    # points.csv and fit.json
        assert open(a, "rb").read() == open(b, "rb").read()
