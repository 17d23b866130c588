"""Performance regression suite for the sampler, DEM builder, and decoder.

Each case measures a throughput rate (items per second) on a fixed,
seeded workload. Rates are compared against stored per-host-class
baselines with a 25% tolerance; hosts without a stored baseline only
record their rates. Cases run serially to avoid interference, and none
of them mutates global state, so numerical outputs are identical before
and after a benchmark run.
"""

from __future__ import annotations

import json
import os
import platform
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import decode, frames
from .codes import CodeSpec, build_code
from .noise import NoiseModel, apply_pauli_noise, lower_ideal

TOLERANCE = 0.25

# rate floors (items/second) keyed by host class; empty entries mean the
# host has no recorded baseline yet.
BASELINES = {}


@dataclass(frozen=True)
class BenchResult:
    name: str
    rate: float         # items per second
    seconds: float      # wall time of the measured section
    host: str

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("benchmark rate must be positive")


def host_class():
    return f"{platform.machine()}-{os.cpu_count()}core"


def _sample_honeycomb():
    """Frame-sample 100k shots of the honeycomb L=4 memory."""
    instance = lower_ideal(build_code(CodeSpec("honeycomb", 4)).circuit)
    shots = 100_000
    frames.sample(instance, 64, seed=0)    # warm caches
    t0 = time.perf_counter()
    frames.sample(instance, shots, seed=0)
    return shots, time.perf_counter() - t0


def _build_dem():
    """Extract the error model of a noisy honeycomb L=3 instance."""
    nm = NoiseModel(distinguishability=0.02, decoherence_ratio=0.02)
    noisy = apply_pauli_noise(build_code(CodeSpec("honeycomb", 3)).circuit, nm)
    instance = lower_ideal(noisy)
    reps = 5
    t0 = time.perf_counter()
    for _ in range(reps):
        decode.build_dem(instance)
    return reps, time.perf_counter() - t0


def _mwpm_syndromes():
    """Match 1000 sampled syndromes of a noisy honeycomb L=2 instance."""
    nm = NoiseModel(decoherence_ratio=0.05)
    noisy = apply_pauli_noise(build_code(CodeSpec("honeycomb", 2)).circuit, nm)
    instance = lower_ideal(noisy)
    graph = decode.build_matching_graph(
        decode.build_dem(instance), num_detectors=instance.num_detectors)
    graph.prepare()
    shots = 1000
    det, _obs = frames.sample(instance, shots, seed=3)
    det_bits = frames.unpack(det, shots)
    t0 = time.perf_counter()
    for s in range(shots):
        defects = [int(i) for i in np.flatnonzero(det_bits[:, s])]
        decode.mwpm_decode(graph, defects)
    return shots, time.perf_counter() - t0


CASES = {
    "sample-honeycomb-L4": _sample_honeycomb,
    "dem-honeycomb-L3": _build_dem,
    "mwpm-honeycomb-L2": _mwpm_syndromes,
}


def run_benchmarks(selection=None):
    """Run the selected cases serially; None selects every case."""
    names = list(CASES) if selection is None else list(selection)
    unknown = [n for n in names if n not in CASES]
    if unknown:
        raise ValueError(f"unknown benchmark cases: {unknown}")
    host = host_class()
    results = []
    for name in names:
        items, seconds = CASES[name]()
        seconds = max(seconds, 1e-9)
        results.append(BenchResult(name=name, rate=items / seconds,
                                   seconds=seconds, host=host))
    return results


def regressions(results, baselines=None, tolerance=TOLERANCE):
    """Cases slower than their stored baseline rate by more than the
    tolerance; an empty list means no regression."""
    baselines = BASELINES if baselines is None else baselines
    out = []
    for r in results:
        floor = baselines.get(r.host, {}).get(r.name)
        if floor is not None and r.rate < floor * (1 - tolerance):
            out.append(r)
    return out


def results_to_json(results):
    return json.dumps([asdict(r) for r in results], indent=2) + "\n"
