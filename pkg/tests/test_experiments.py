"""Sweep orchestration, threshold fitting, and reporting."""

import json
import math

import numpy as np
import pytest

from spoqclab import experiments as ex
from spoqclab.codes import CodeSpec, build_code
from spoqclab.decode import classify_erasure_instance, mwpm_decode
from spoqclab.noise import NoiseModel, lower_with_coins, rus_sites, sample_instance


def test_classify_instances_matches_direct_oracle():
    """The precomputed site-symptom tables reproduce per-instance GF(2)
    classification of the actually lowered circuits."""
    spec = CodeSpec("honeycomb", 2)
    circuit = build_code(spec).circuit
    num_sites = len(rus_sites(circuit))
    fast = ex.classify_instances(spec, 0.2, seed=31, start=0, stop=20)
    for m in range(20):
        coins = np.random.default_rng([31, m]).random(num_sites) < 0.2
        inst = lower_with_coins(circuit, coins)
        assert classify_erasure_instance(inst) == fast[m]


def test_classify_coins_match_sample_instance():
    spec = CodeSpec("honeycomb", 2)
    circuit = build_code(spec).circuit
    nm = NoiseModel(p_rus=0.3)
    inst = sample_instance(circuit, nm, seed=[9, 4])
    coins = np.random.default_rng([9, 4]).random(len(rus_sites(circuit))) < 0.3
    assert np.array_equal(inst.coins, coins)


def test_erasure_matcher_agrees_with_full_matching():
    """Cluster pairing returns the same logical prediction as running the
    blossom matcher on the full graph."""
    spec = CodeSpec("honeycomb", 2)
    circuit = build_code(spec).circuit
    nm = NoiseModel(p_rus=0.15)
    rng = np.random.default_rng(3)
    checked = 0
    for seed in range(6):
        inst = sample_instance(circuit, nm, seed=seed)
        if not inst.coins.any():
            continue
        matcher = ex.ErasureMatcher(inst.lowered)
        graph = matcher.graph
        for _ in range(10):
            # Flip a few random edges so the defect set is a real syndrome.
            parity = np.zeros(graph.num_nodes, dtype=bool)
            for e in rng.integers(len(graph.edges), size=int(rng.integers(1, 5))):
                u, v, _w, _mask, _eid = graph.edges[e]
                parity[u] ^= True
                parity[v] ^= True
            defects = [int(d) for d in np.flatnonzero(parity[:graph.num_detectors])]
            want = mwpm_decode(graph, defects)[1] & 1
            assert matcher.decode(defects) & 1 == want
            checked += 1
    assert checked >= 30


def test_erasure_point_statistics():
    spec = CodeSpec("honeycomb", 2)
    nm = NoiseModel(p_rus=0.12)
    pt = ex.run_erasure_point(spec, nm, M=200, N=64, seed=5, workers=1)
    values = ex.classify_instances(spec, 0.12, seed=5, start=0, stop=200)
    eps = float(np.mean(values))
    assert pt.epsilon == eps
    assert pt.variance == pytest.approx(200 / 199 * eps * (0.5 - eps))
    half = ex.T_FACTOR * math.sqrt(pt.variance / 200)
    assert pt.ci == (max(0.0, eps - half), min(0.5, eps + half))
    assert pt.distance == build_code(spec).distance
    assert pt.instances == 200 and pt.shots == 64


def test_erasure_point_worker_determinism():
    spec = CodeSpec("honeycomb", 2)
    nm = NoiseModel(p_rus=0.15)
    a = ex.run_erasure_point(spec, nm, M=128, N=64, seed=9, workers=1)
    b = ex.run_erasure_point(spec, nm, M=128, N=64, seed=9, workers=2)
    assert a == b


def test_pauli_point_worker_determinism():
    spec = CodeSpec("honeycomb", 2)
    nm = NoiseModel(decoherence_ratio=0.05)
    a = ex.run_pauli_point(spec, nm, N=512, seed=4, workers=1)
    b = ex.run_pauli_point(spec, nm, N=512, seed=4, workers=2)
    assert a == b


def test_point_kind_validation():
    spec = CodeSpec("honeycomb", 2)
    with pytest.raises(ex.ConfigError):
        ex.run_erasure_point(spec, NoiseModel(decoherence_ratio=0.1), 10, 64, 0)
    with pytest.raises(ex.ConfigError):
        ex.run_pauli_point(spec, NoiseModel(p_rus=0.1), 64, 0)


def _synthetic_points(curves, grid, half=1e-4, rng=None):
    points = []
    for size, (dist, fn) in curves.items():
        for p in grid:
            eps = fn(p) + (rng.normal(0, half / ex.T_FACTOR) if rng else 0.0)
            points.append(ex.PointEstimate(
                p=p, size=size, instances=1, shots=10 ** 6, epsilon=eps,
                variance=0.0, ci=(eps - half, eps + half), distance=dist))
    return points


def test_fit_threshold_exact_crossing():
    """Two straight lines crossing at p = 0.10 with tiny uncertainties."""
    grid = np.linspace(0.05, 0.15, 9)
    curves = {3: (0, lambda p: 0.02 + 0.5 * p),
              5: (0, lambda p: 0.002 + 0.68 * p)}
    fit = ex.fit_threshold(_synthetic_points(curves, grid), K=2000, seed=0)
    assert fit.sizes == (3, 5)
    assert fit.threshold == pytest.approx(0.10, abs=1e-3)
    assert fit.std < 1e-2
    assert fit.kept >= 1900


def test_fit_threshold_recovers_noisy_crossing():
    rng = np.random.default_rng(8)
    grid = np.linspace(0.14, 0.30, 9)
    curves = {3: (0, lambda p: 0.05 + 0.9 * (p - 0.219)),
              5: (0, lambda p: 0.05 + 2.4 * (p - 0.219))}
    fit = ex.fit_threshold(_synthetic_points(curves, grid, half=0.01, rng=rng),
                           K=2000, seed=1)
    assert abs(fit.threshold - 0.219) < 3 * fit.std + 1e-9


def test_fit_threshold_pairs_by_distance():
    """Sizes sharing a fault distance are one curve family; the smallest
    circuit represents the duplicated distance and the fit intersects the
    two largest distances."""
    grid = np.linspace(0.05, 0.15, 9)
    curves = {2: (4, lambda p: 0.02 + 0.5 * p),
              3: (4, lambda p: 0.3 + 0.1 * p),      # same distance, worse curve
              4: (8, lambda p: 0.002 + 0.68 * p)}
    fit = ex.fit_threshold(_synthetic_points(curves, grid), K=2000, seed=0)
    assert fit.sizes == (2, 4)
    assert fit.threshold == pytest.approx(0.10, abs=1e-3)


def test_fit_threshold_no_crossing_raises():
    grid = np.linspace(0.05, 0.15, 9)
    curves = {3: (0, lambda p: 0.3 + 0.5 * p),
              5: (0, lambda p: 0.002 + 0.1 * p)}
    with pytest.raises(ex.NumericalError):
        ex.fit_threshold(_synthetic_points(curves, grid), K=500, seed=0)


def test_fit_threshold_input_validation():
    grid = np.linspace(0.05, 0.15, 9)
    one_size = _synthetic_points({3: (0, lambda p: p)}, grid)
    with pytest.raises(ex.ConfigError):
        ex.fit_threshold(one_size, K=100)
    short = _synthetic_points({3: (0, lambda p: p), 5: (0, lambda p: 2 * p)},
                              np.linspace(0.05, 0.15, 4))
    with pytest.raises(ex.ConfigError):
        ex.fit_threshold(short, K=100)
    same_distance = _synthetic_points({2: (4, lambda p: p),
                                       3: (4, lambda p: 2 * p)}, grid)
    with pytest.raises(ex.ConfigError):
        ex.fit_threshold(same_distance, K=100)


def test_sweep_config_validation():
    ok = dict(family="honeycomb", flavor="SPOQC2", sizes=(2, 3),
              noise_axis="erasure", p_grid=(0.1, 0.12, 0.14, 0.16, 0.18))
    ex.SweepConfig(**ok)
    for bad in (dict(ok, noise_axis="loss"),
                dict(ok, p_grid=(0.1, 0.2)),
                dict(ok, sizes=(2,)),
                dict(ok, N=32),
                dict(ok, M=0),
                dict(ok, seed=-1)):
        with pytest.raises(ex.ConfigError):
            ex.SweepConfig(**bad)


def test_load_config(tmp_path):
    raw = dict(family="honeycomb", flavor="SPOQC2", sizes=[2, 3],
               noise_axis="erasure", p_grid=[0.1, 0.12, 0.14, 0.16, 0.18],
               M=50, N=64, K=500, seed=3, out_dir=str(tmp_path))
    path = tmp_path / "run.json"
    path.write_text(json.dumps(raw))
    cfg = ex.load_config(path)
    assert cfg.sizes == (2, 3) and cfg.M == 50 and cfg.seed == 3

    path.write_text(json.dumps(dict(raw, bogus=1)))
    with pytest.raises(ex.ConfigError):
        ex.load_config(path)

    del raw["p_grid"]
    path.write_text(json.dumps(raw))
    with pytest.raises(ex.ConfigError):
        ex.load_config(path)


def _small_config(**kw):
    base = dict(family="honeycomb", flavor="SPOQC2", sizes=(2, 3),
                noise_axis="erasure",
                p_grid=(0.16, 0.18, 0.20, 0.22, 0.24), M=80, N=64, K=500,
                seed=12)
    base.update(kw)
    return ex.SweepConfig(**base)


def test_run_sweep_order_and_determinism():
    cfg = _small_config()
    a = ex.run_sweep(cfg, workers=1)
    b = ex.run_sweep(cfg, workers=1)
    assert a == b
    assert [(pt.size, pt.p) for pt in a] == \
        [(s, p) for s in (2, 3) for p in cfg.p_grid]
    seen = []

    def progress(pt):
        seen.append(pt)

    assert ex.run_sweep(cfg, workers=1, progress=progress) == a
    assert seen == a


def test_noise_model_dispatch():
    cfg = _small_config()
    assert cfg.noise_model(0.2) == NoiseModel(p_rus=0.2)
    dec = _small_config(noise_axis="decoherence")
    assert dec.noise_model(0.02) == NoiseModel(decoherence_ratio=0.02)
    dis = _small_config(noise_axis="distinguishability")
    assert dis.noise_model(0.02) == NoiseModel(distinguishability=0.02)


def test_csv_roundtrip():
    pts = ex.run_sweep(_small_config(M=40), workers=1)
    text = ex.points_to_csv(pts)
    back = ex.points_from_csv(text)
    assert [(b.p, b.size, b.distance, b.epsilon, b.ci) for b in back] == \
        [(a.p, a.size, a.distance, a.epsilon, a.ci)
         for a in sorted(pts, key=lambda t: (t.size, t.p))]
    assert ex.points_to_csv(back) == text


def test_fit_json_fields():
    grid = np.linspace(0.05, 0.15, 9)
    curves = {3: (0, lambda p: 0.02 + 0.5 * p),
              5: (0, lambda p: 0.002 + 0.68 * p)}
    fit = ex.fit_threshold(_synthetic_points(curves, grid), K=500, seed=0)
    payload = json.loads(ex.fit_to_json(fit))
    assert payload["sizes"] == [3, 5]
    assert payload["kept"] == len(payload["intersections"])
    assert payload["kept_fraction"] == payload["kept"] / payload["bootstrap"]
    assert payload["std"] == pytest.approx(math.sqrt(payload["variance"]))
    assert set(payload["coefficients"]) == {"3", "5"}
    # Serialization is stable.
    assert ex.fit_to_json(fit) == ex.fit_to_json(fit)


def test_report_outputs(tmp_path):
    grid = np.linspace(0.05, 0.15, 9)
    curves = {3: (0, lambda p: 0.02 + 0.5 * p),
              5: (0, lambda p: 0.002 + 0.68 * p)}
    pts = _synthetic_points(curves, grid)
    fit = ex.fit_threshold(pts, K=500, seed=0)
    csv_path, json_path, svg_path = ex.report(fit, pts, tmp_path)
    assert open(csv_path).readline().startswith("p,size,distance")
    assert json.loads(open(json_path).read())["threshold"] == fit.threshold
    svg = open(svg_path).read()
    assert "curve-size-3" in svg and "curve-size-5" in svg
    assert "threshold-band" in svg
    with pytest.raises(ex.ConfigError):
        ex.report(fit, [], tmp_path)


def test_point_seed_decorrelates():
    seeds = {ex._point_seed(0, k) for k in range(100)}
    seeds |= {ex._point_seed(1, k) for k in range(100)}
    assert len(seeds) == 200


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv("SPOQCLAB_WORKERS", raising=False)
    assert ex.worker_count() == 1
    monkeypatch.setenv("SPOQCLAB_WORKERS", "6")
    assert ex.worker_count() == 6
    monkeypatch.setenv("SPOQCLAB_WORKERS", "many")
    with pytest.raises(ex.ConfigError):
        ex.worker_count()
