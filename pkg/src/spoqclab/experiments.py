"""Monte Carlo orchestration: point estimators, threshold fits, reports.

Seeding is hierarchical and scheduling-free: instance m of point k under
base seed s draws from generator (s, k, m), and results are reduced in
task-index order, so any worker count produces byte-identical outputs.
Worker count comes from the SPOQCLAB_WORKERS environment variable
(default 1); workers are stateless processes.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from itertools import groupby

import numpy as np
from scipy.optimize import curve_fit

from . import decode, frames
from .circuit import Circuit, Instruction
from .codes import CodeSpec, build_code
from .noise import NoiseModel, lower_with_coins, rus_sites

T_FACTOR = 3.291        # t_{0.999, inf}: 99.9% confidence intervals
NOISE_AXES = ("erasure", "distinguishability", "decoherence")


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 2)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to converge (CLI exit code 3)."""


def worker_count():
    try:
        return max(1, int(os.environ.get("SPOQCLAB_WORKERS", "1")))
    except ValueError:
        raise ConfigError("SPOQCLAB_WORKERS must be an integer")


@dataclass(frozen=True)
class InstanceEstimate:
    instance: int
    epsilon: float      # 0.0 or 0.5 for erasure instances
    shots: int
    mismatches: int


@dataclass(frozen=True)
class PointEstimate:
    p: float
    size: int
    instances: int      # M (1 for Pauli-noise points)
    shots: int          # N per instance
    epsilon: float
    variance: float     # unbiased sample variance of the estimator
    ci: tuple           # (lo, hi) at the fixed t-factor
    distance: int = 0   # certified fault distance of the circuit (0: unknown)

    @property
    def ci_half(self):
        return (self.ci[1] - self.ci[0]) / 2


@dataclass
class ThresholdFit:
    coefficients: dict      # size -> [a0..a4]
    covariance: dict        # size -> 5x5 nested lists
    sizes: tuple            # the two sizes intersected (small, large)
    p_range: tuple
    bootstrap: int          # K
    kept: int
    intersections: list
    threshold: float
    variance: float

    @property
    def std(self):
        return math.sqrt(self.variance)


# -- erasure points -----------------------------------------------------

@lru_cache(maxsize=16)
def _erasure_tables(spec):
    """Per-RUS-site herald symptom rows of a code's circuit.

    The lowering keeps gate content fixed, so the symptom of a heralding
    dephasing arm does not depend on which other sites are erased; one
    frame propagation of the fully erased instance yields every row.
    Returns (site count, [(row_a, row_b)] per site, detector count).
    """
    circuit = build_code(spec).circuit
    sites = rus_sites(circuit)
    lowered = lower_with_coins(circuit, np.ones(len(sites), dtype=bool)).lowered
    comps = [(dets, obss, label) for p, dets, obss, label
             in decode.propagate_components(lowered) if p == 0.5]
    num_detectors = circuit.num_detectors
    rows = []
    it = iter(comps)
    for _k, group in groupby(sites, key=lambda s: s.instruction_index):
        group = list(group)
        block = {}
        for _ in range(2 * len(group)):
            dets, obss, label = next(it)
            r = 0
            for d in dets:
                r |= 1 << d
            if 0 in obss:
                r |= 1 << num_detectors
            block[label[1]] = r
        for s in group:
            rows.append((block[s.targets[0]], block[s.targets[1]]))
    assert next(it, None) is None
    return len(sites), rows, num_detectors


def classify_instances(spec, p_rus, seed, start, stop):
    """Exact erasure classification of instances start..stop-1."""
    num_sites, rows, num_detectors = _erasure_tables(spec)
    out = []
    for m in range(start, stop):
        coins = np.random.default_rng([seed, m]).random(num_sites) < p_rus
        active = [r for k in np.flatnonzero(coins) for r in rows[k]]
        out.append(decode.rank_classify(active, num_detectors))
    return out


def run_erasure_point(spec, nm, M, N, seed, workers=None):
    """Logical error rate under heralded erasure at one noise value.

    Each of the M instances is classified exactly by GF(2) elimination
    (the rank oracle equals the infinite-shot Monte Carlo limit), so N
    only enters the bookkeeping.
    """
    if nm.distinguishability or nm.decoherence_ratio:
        raise ConfigError("erasure points take an erasure-only noise model")
    workers = worker_count() if workers is None else workers
    if workers == 1 or M < 64:
        values = classify_instances(spec, nm.p_rus, seed, 0, M)
    else:
        bounds = np.linspace(0, M, workers * 4 + 1).astype(int)
        jobs = [(spec, nm.p_rus, seed, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_classify_star, jobs))
        values = [v for chunk in chunks for v in chunk]
    eps = float(np.mean(values)) if values else 0.0
    var = M / (M - 1) * eps * (0.5 - eps) if M > 1 else 0.0
    half = T_FACTOR * math.sqrt(var / M) if M else 0.0
    return PointEstimate(p=nm.p_rus, size=spec.size, instances=M, shots=N,
                         epsilon=eps, variance=var,
                         ci=(max(0.0, eps - half), min(0.5, eps + half)),
                         distance=build_code(spec).distance)


def _classify_star(args):
    return classify_instances(*args)


# -- erasure matching (used to cross-check the rank oracle) -------------

def _with_uniform_z(instance, p):
    out = Circuit(coordinates=dict(instance.coordinates))
    n = instance.qubit_count
    for inst in instance.instructions:
        if inst.opcode == "TICK":
            out.instructions.append(Instruction("Z_ERROR", args=(p,), targets=range(n)))
        out.instructions.append(inst)
    return out


class ErasureMatcher:
    """MWPM decoder for one erasure instance.

    Every erased mechanism has weight 0, and each one lands inside a
    single zero-weight cluster, so each cluster holds an even number of
    defects and a zero-cost perfect matching pairs defects cluster by
    cluster along geodesics. A sparse uniform-Z background supplies the
    graphlike context; its edges carry large weights and are never used
    by a minimum-weight solution when a zero-cost one exists.
    """

    def __init__(self, instance_circuit, background=1e-6):
        dem = decode.build_dem(_with_uniform_z(instance_circuit, background))
        self.graph = decode.build_matching_graph(
            dem, num_detectors=instance_circuit.num_detectors)
        self.graph.prepare()
        n = self.graph.num_nodes
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for u, v, w, _mask, _eid in self.graph.edges:
            if w == 0.0:
                parent[find(u)] = find(v)
        self.cluster = [find(a) for a in range(n)]

    def decode(self, defects):
        groups = {}
        for d in defects:
            groups.setdefault(self.cluster[d], []).append(d)
        boundary = self.graph.boundary
        mask = 0
        for root, group in groups.items():
            if len(group) % 2:
                if boundary is None or self.cluster[boundary] != root:
                    # No zero-cost completion: fall back to full matching.
                    _pairs, mask = decode.mwpm_decode(self.graph, defects)
                    return mask
                group.append(boundary)
            for a, b in zip(group[0::2], group[1::2]):
                mask ^= self.graph.path_mask(a, b)
        return mask


def mwpm_shot_errors(instance, shots, seed):
    """Decode `shots` sampled shots of one erasure instance with MWPM."""
    matcher = ErasureMatcher(instance.lowered)
    det, obs = frames.sample(instance.lowered, shots, seed)
    det_bits = frames.unpack(det, shots)
    obs_bits = frames.unpack(obs, shots)[0]
    mismatches = 0
    cache = {}
    for s in range(shots):
        defects = tuple(int(i) for i in np.flatnonzero(det_bits[:, s]))
        pred = cache.get(defects)
        if pred is None:
            pred = cache[defects] = matcher.decode(defects)
        mismatches += int(pred & 1) ^ int(obs_bits[s])
    return mismatches


# -- Pauli-noise points -------------------------------------------------

@lru_cache(maxsize=16)
def _pauli_decoder(spec, nm):
    from .noise import apply_pauli_noise, lower_ideal

    noisy = apply_pauli_noise(build_code(spec).circuit, nm)
    instance = lower_ideal(noisy)
    dem = decode.build_dem(instance)
    graph = decode.build_matching_graph(dem, num_detectors=instance.num_detectors)
    graph.prepare()
    return instance, graph


def decode_shot_range(spec, nm, shots, seed, start, stop):
    """Mismatch count over the shot slice [start, stop)."""
    instance, graph = _pauli_decoder(spec, nm)
    det, obs = frames.sample(instance, shots, seed)
    det_bits = frames.unpack(det, shots)
    obs_bits = frames.unpack(obs, shots)[0]
    mismatches = 0
    cache = {}
    for s in range(start, stop):
        defects = tuple(int(i) for i in np.flatnonzero(det_bits[:, s]))
        pred = cache.get(defects)
        if pred is None:
            _pairs, pred = decode.mwpm_decode(graph, defects)
            cache[defects] = pred
        mismatches += int(pred & 1) ^ int(obs_bits[s])
    return mismatches


def _decode_star(args):
    return decode_shot_range(*args)


def run_pauli_point(spec, nm, N, seed, workers=None):
    """Logical error rate under unheralded Pauli noise at one value."""
    if nm.p_rus:
        raise ConfigError("Pauli-noise points take an erasure-free noise model")
    workers = worker_count() if workers is None else workers
    axis_value = nm.distinguishability or nm.decoherence_ratio
    if workers == 1 or N < 256:
        mismatches = decode_shot_range(spec, nm, N, seed, 0, N)
    else:
        bounds = np.linspace(0, N, workers * 2 + 1).astype(int)
        jobs = [(spec, nm, N, seed, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            mismatches = sum(pool.map(_decode_star, jobs))
    eps = mismatches / N
    var = N / (N - 1) * eps * (1 - eps) if N > 1 else 0.0
    half = T_FACTOR * math.sqrt(var / N)
    return PointEstimate(p=axis_value, size=spec.size, instances=1, shots=N,
                         epsilon=eps, variance=var,
                         ci=(max(0.0, eps - half), min(1.0, eps + half)),
                         distance=build_code(spec).distance)


# -- threshold fitting --------------------------------------------------

def _quartic(p, a0, a1, a2, a3, a4):
    return a0 + a1 * p + a2 * p ** 2 + a3 * p ** 3 + a4 * p ** 4


def fit_threshold(points, K=10_000, seed=0):
    """Bootstrap crossing of fitted quartic error-rate curves.

    Fits a weighted quartic per size (weights are inverse squared CI
    half-widths), draws K coefficient pairs for the curves of the two
    largest fault distances from the fitted multivariate normals, locates
    the intersection of each pair on the sweep range by sign-change
    bracketing and bisection, keeps single-intersection draws, and
    reports their mean and variance.

    Curves are indexed by certified fault distance when the points carry
    one; several sizes can certify the same distance, in which case the
    smallest circuit represents it. Points without a distance annotation
    fall back to the size itself.
    """
    by_size = {}
    for pt in points:
        by_size.setdefault(pt.size, []).append(pt)
    if len(by_size) < 2:
        raise ConfigError("threshold fitting needs at least two sizes")
    coeffs, covs = {}, {}
    p_lo = min(pt.p for pt in points)
    p_hi = max(pt.p for pt in points)
    for size, pts in by_size.items():
        pts.sort(key=lambda pt: pt.p)
        if len(pts) < 5:
            raise ConfigError("threshold fitting needs at least 5 noise values")
        x = np.array([pt.p for pt in pts])
        y = np.array([pt.epsilon for pt in pts])
        sigma = np.asarray([pt.ci_half for pt in pts], dtype=float)
        # A zero-count point reports a zero-width interval; floor its
        # weight so it cannot over-constrain the curve.
        sigma = np.maximum(np.maximum(sigma, 0.05 * sigma.max()), 1e-12)
        try:
            popt, pcov = curve_fit(_quartic, x, y, p0=np.zeros(5), sigma=sigma,
                                   absolute_sigma=True)
        except RuntimeError as e:
            raise NumericalError(f"quartic fit failed for size {size}: {e}")
        coeffs[size] = popt
        covs[size] = pcov
    representative = {}
    for size in sorted(by_size):
        d = max(pt.distance for pt in by_size[size])
        representative.setdefault(d if d > 0 else size, size)
    if len(representative) < 2:
        raise ConfigError("threshold fitting needs two distinct fault distances")
    small, large = (representative[d] for d in sorted(representative)[-2:])
    rng = np.random.default_rng(seed)
    draws_s = rng.multivariate_normal(coeffs[small], covs[small], size=K)
    draws_l = rng.multivariate_normal(coeffs[large], covs[large], size=K)
    grid = np.linspace(p_lo, p_hi, 10_001)
    design = np.vander(grid, 5, increasing=True)       # (G, 5)
    roots = []
    for lo in range(0, K, 500):
        hi = min(lo + 500, K)
        diff = (draws_l[lo:hi] - draws_s[lo:hi]) @ design.T
        sign = np.sign(diff)
        flips = (sign[:, 1:] * sign[:, :-1]) < 0
        single = flips.sum(axis=1) == 1
        if not np.any(single):
            continue
        idx = np.argmax(flips[single], axis=1)
        a = grid[idx]
        b = grid[idx + 1]
        delta = (draws_l[lo:hi] - draws_s[lo:hi])[single]
        fa = np.einsum("ij,ij->i", delta, np.vander(a, 5, increasing=True))
        while np.max(b - a) > 1e-10:
            mid = (a + b) / 2
            fm = np.einsum("ij,ij->i", delta, np.vander(mid, 5, increasing=True))
            left = (fa * fm) <= 0
            b = np.where(left, mid, b)
            fa = np.where(left, fa, fm)
            a = np.where(left, a, mid)
        roots.extend(((a + b) / 2).tolist())
    if len(roots) < 100:
        raise NumericalError(
            f"only {len(roots)} of {K} bootstrap draws had a single "
            "intersection; the sweep range does not bracket a crossing")
    roots_arr = np.array(roots)
    return ThresholdFit(
        coefficients={s: [float(c) for c in coeffs[s]] for s in sorted(by_size)},
        covariance={s: [[float(v) for v in row] for row in covs[s]]
                    for s in sorted(by_size)},
        sizes=(small, large), p_range=(float(p_lo), float(p_hi)),
        bootstrap=K, kept=len(roots), intersections=roots,
        threshold=float(roots_arr.mean()),
        variance=float(roots_arr.var(ddof=1)) if len(roots) > 1 else 0.0)


# -- sweep configuration and reporting ----------------------------------

@dataclass(frozen=True)
class SweepConfig:
    family: str
    flavor: str
    sizes: tuple
    noise_axis: str
    p_grid: tuple
    M: int = 2000
    N: int = 64
    K: int = 10_000
    seed: int = 0
    out_dir: str = "."

    def __post_init__(self):
        if self.noise_axis not in NOISE_AXES:
            raise ConfigError(f"noise_axis must be one of {NOISE_AXES}")
        if len(self.p_grid) < 5:
            raise ConfigError("p_grid needs at least 5 values")
        if len(self.sizes) < 2:
            raise ConfigError("sizes needs at least 2 entries")
        if self.noise_axis == "erasure" and self.N < 64:
            raise ConfigError("erasure runs need N >= 64 shots per instance")
        if min(self.M, self.N, self.K) < 1 or self.seed < 0:
            raise ConfigError("M, N, K must be positive and seed non-negative")

    def noise_model(self, p):
        kw = {"flavor": self.flavor}
        if self.noise_axis == "erasure":
            return NoiseModel(p_rus=p, **kw)
        if self.noise_axis == "distinguishability":
            return NoiseModel(distinguishability=p, **kw)
        return NoiseModel(decoherence_ratio=p, **kw)


def load_config(path):
    try:
        with open(path) as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    known = {"family", "flavor", "sizes", "noise_axis", "p_grid", "M", "N",
             "K", "seed", "out_dir"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    for req in ("family", "flavor", "sizes", "noise_axis", "p_grid"):
        if req not in raw:
            raise ConfigError(f"config is missing required field {req!r}")
    raw["sizes"] = tuple(raw["sizes"])
    raw["p_grid"] = tuple(raw["p_grid"])
    try:
        return SweepConfig(**raw)
    except TypeError as e:
        raise ConfigError(str(e))


def run_sweep(config, workers=None, progress=None):
    """All point estimates of a sweep, in deterministic task order."""
    points = []
    tasks = [(size, p) for size in sorted(config.sizes) for p in config.p_grid]
    for k, (size, p) in enumerate(tasks):
        try:
            spec = CodeSpec(config.family, size, flavor=config.flavor)
        except ValueError as e:
            raise ConfigError(str(e))
        nm = config.noise_model(p)
        seed = _point_seed(config.seed, k)
        if config.noise_axis == "erasure":
            pt = run_erasure_point(spec, nm, config.M, config.N, seed, workers)
        else:
            pt = run_pauli_point(spec, nm, config.N, seed, workers)
        points.append(pt)
        if progress:
            progress(pt)
    return points


def _point_seed(base, index):
    return int(np.random.SeedSequence((base, index)).generate_state(1)[0])


def points_to_csv(points):
    lines = ["p,size,distance,epsilon,ci_lo,ci_hi"]
    for pt in sorted(points, key=lambda t: (t.size, t.p)):
        lines.append(f"{pt.p:.17g},{pt.size},{pt.distance},{pt.epsilon:.17g},"
                     f"{pt.ci[0]:.17g},{pt.ci[1]:.17g}")
    return "\n".join(lines) + "\n"


def points_from_csv(text):
    points = []
    lines = [l for l in text.splitlines() if l.strip()]
    for line in lines[1:]:
        p, size, dist, eps, lo, hi = line.split(",")
        points.append(PointEstimate(
            p=float(p), size=int(size), instances=0, shots=0,
            epsilon=float(eps), variance=0.0, ci=(float(lo), float(hi)),
            distance=int(dist)))
    return points


def fit_to_json(fit):
    payload = {
        "coefficients": {str(s): c for s, c in fit.coefficients.items()},
        "covariance": {str(s): c for s, c in fit.covariance.items()},
        "sizes": list(fit.sizes),
        "p_range": list(fit.p_range),
        "bootstrap": fit.bootstrap,
        "kept": fit.kept,
        "kept_fraction": fit.kept / fit.bootstrap,
        "threshold": fit.threshold,
        "variance": fit.variance,
        "std": fit.std,
        "intersections": fit.intersections,
        "weighting": "inverse squared CI half-width",
        "t_factor": T_FACTOR,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def plot_points(points, fit, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    sizes = sorted({pt.size for pt in points})
    for size in sizes:
        pts = sorted((pt for pt in points if pt.size == size), key=lambda t: t.p)
        x = [pt.p for pt in pts]
        y = [max(pt.epsilon, 1e-6) for pt in pts]
        err = [pt.ci_half for pt in pts]
        line = ax.errorbar(x, y, yerr=err, marker="o", ms=3, lw=1,
                           label=f"size {size}")
        line.lines[0].set_gid(f"curve-size-{size}")
    if fit is not None:
        band = ax.axvspan(fit.threshold - fit.std, fit.threshold + fit.std,
                          color="gray", alpha=0.4)
        band.set_gid("threshold-band")
        ax.axvline(fit.threshold, color="gray", ls=":", lw=1)
    ax.set_yscale("log")
    ax.set_xlabel("noise parameter")
    ax.set_ylabel("logical error rate")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def report(fit, points, out_dir):
    """Write points.csv, fit.json and plot.svg; returns the file paths."""
    if not points:
        raise ConfigError("cannot report an empty point list")
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "points.csv")
    json_path = os.path.join(out_dir, "fit.json")
    svg_path = os.path.join(out_dir, "plot.svg")
    with open(csv_path, "w") as f:
        f.write(points_to_csv(points))
    if fit is not None:
        with open(json_path, "w") as f:
            f.write(fit_to_json(fit))
    plot_points(points, fit, svg_path)
    return csv_path, json_path, svg_path


def run_and_report(config, workers=None, progress=None):
    points = run_sweep(config, workers=workers, progress=progress)
    fit = fit_threshold(points, K=config.K, seed=config.seed)
    paths = report(fit, points, config.out_dir)
    return points, fit, paths
