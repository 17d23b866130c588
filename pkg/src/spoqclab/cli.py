"""Command-line interface.

Subcommands: gen, lower, sample, decode, sweep, fit, report, optics,
bench. Exit codes: 0 on success, 2 on configuration errors (bad flags,
malformed files), 3 on numerical failures (fits that do not converge,
sweep ranges that do not bracket a crossing).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import bench, decode, experiments, frames, optics
from .circuit import CircuitError, parse_circuit, print_circuit
from .codes import CodeSpec, build_code
from .experiments import ConfigError, NumericalError
from .noise import NoiseModel, apply_pauli_noise, sample_instance


def _read(path):
    try:
        with open(path) as f:
            return f.read()
    except OSError as e:
        raise ConfigError(str(e))


def _read_bytes(path):
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise ConfigError(str(e))


def _write(path, data):
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode) as f:
        f.write(data)


def _cmd_gen(args):
    flavor = args.flavor.upper()
    try:
        spec = CodeSpec(args.family, args.size, flavor=flavor,
                        rounds=args.rounds)
    except ValueError as e:
        raise ConfigError(str(e))
    _write(args.output, print_circuit(build_code(spec).circuit))
    return 0


def _noise_model_from_json(text):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"bad noise model JSON: {e}")
    if not isinstance(raw, dict):
        raise ConfigError("noise model must be a JSON object")
    unknown = set(raw) - {"prus", "eps", "D", "ratio"}
    if unknown:
        raise ConfigError(f"unknown noise model fields: {sorted(unknown)}")
    if "prus" in raw and "eps" in raw:
        raise ConfigError("give either prus or eps, not both")
    try:
        kw = dict(distinguishability=float(raw.get("D", 0.0)),
                  decoherence_ratio=float(raw.get("ratio", 0.0)))
        if "eps" in raw:
            return NoiseModel.from_epsilon(float(raw["eps"]), **kw)
        return NoiseModel(p_rus=float(raw.get("prus", 0.0)), **kw)
    except ValueError as e:
        raise ConfigError(str(e))


def _cmd_lower(args):
    nm = _noise_model_from_json(args.model)
    circuit = parse_circuit(_read(args.input))
    noisy = apply_pauli_noise(circuit, nm)
    instance = sample_instance(noisy, nm, seed=args.seed)
    _write(args.output, print_circuit(instance.lowered))
    if args.dem:
        _write(args.dem, decode.dem_to_text(decode.build_dem(instance.lowered)))
    return 0


def _cmd_sample(args):
    circuit = parse_circuit(_read(args.input))
    if circuit.level != "Instance":
        raise ConfigError("sampling needs a lowered circuit; run `lower` first")
    det, obs = frames.sample(circuit, args.shots, seed=args.seed)
    _write(args.output, frames.shot_rows(det, args.shots))
    if args.obs:
        _write(args.obs, frames.shot_rows(obs, args.shots))
    return 0


def _cmd_decode(args):
    try:
        dem = decode.dem_from_text(_read(args.dem))
    except ValueError as e:
        raise ConfigError(str(e))
    num_detectors = args.num_detectors or max(
        (d + 1 for m in dem for d in m.detectors), default=0)
    num_observables = max((o + 1 for m in dem for o in m.observables), default=1)
    graph = decode.build_matching_graph(dem, num_detectors=num_detectors)
    graph.prepare()
    data = _read_bytes(args.dets)
    row = -(-num_detectors // 8)
    if row == 0 or len(data) % row:
        raise ConfigError("detector file size does not match the model")
    packed = frames.from_shot_rows(data, num_detectors)
    shots = len(data) // row
    bits = frames.unpack(packed, shots)
    preds = np.zeros((num_observables, shots), dtype=np.uint8)
    cache = {}
    for s in range(shots):
        defects = tuple(int(i) for i in np.flatnonzero(bits[:, s]))
        mask = cache.get(defects)
        if mask is None:
            try:
                _pairs, mask = decode.mwpm_decode(graph, defects)
            except ValueError as e:
                raise NumericalError(str(e))
            cache[defects] = mask
        for k in range(num_observables):
            preds[k, s] = (mask >> k) & 1
    _write(args.output, _pack_rows(preds))
    return 0


def _pack_rows(bits):
    """Pack a (num_bits, shots) 0/1 array into little-endian shot rows."""
    return np.packbits(bits.T, axis=1, bitorder="little").tobytes()


def _cmd_sweep(args):
    config = experiments.load_config(args.config)
    if args.out is not None:
        config = dataclasses.replace(config, out_dir=args.out)
    _points, fit, paths = experiments.run_and_report(
        config, workers=args.workers,
        progress=(lambda pt: print(
            f"size={pt.size} p={pt.p:g} eps={pt.epsilon:.5f}", flush=True))
        if args.verbose else None)
    print(f"threshold {fit.threshold:.6f} +- {fit.std:.6f}")
    for p in paths:
        print(p)
    return 0


def _cmd_fit(args):
    points = experiments.points_from_csv(_read(args.points))
    fit = experiments.fit_threshold(points, K=args.bootstrap, seed=args.seed)
    _write(args.output, experiments.fit_to_json(fit))
    print(f"threshold {fit.threshold:.6f} +- {fit.std:.6f}")
    return 0


def _cmd_report(args):
    points = experiments.points_from_csv(_read(args.points))
    fit = experiments.fit_threshold(points, K=args.bootstrap, seed=args.seed)
    for p in experiments.report(fit, points, args.out):
        print(p)
    return 0


def _cmd_optics(args):
    if args.table_command != "table":
        raise ConfigError("usage: optics table --phi <real>")
    sys.stdout.write(optics.amplitude_table_csv(args.phi))
    return 0


def _cmd_bench(args):
    names = [n for n in bench.CASES if args.filter in n]
    results = bench.run_benchmarks(names)
    sys.stdout.write(bench.results_to_json(results))
    if bench.regressions(results):
        print("performance regression beyond tolerance", file=sys.stderr)
        return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spoqclab",
        description="Floquet and surface code memories on spin-optical "
                    "architectures: circuit generation, sampling, decoding, "
                    "and threshold sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a memory circuit")
    p.add_argument("--family", required=True, choices=["honeycomb", "surface"])
    p.add_argument("--L", "-d", dest="size", type=int, required=True,
                   help="lattice parameter L (honeycomb) or distance d (surface)")
    p.add_argument("--flavor", default="spoqc2", choices=["spoqc", "spoqc2"])
    p.add_argument("--rounds", type=int, default=0,
                   help="0 selects the family default")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("lower", help="apply noise and lower to an instance")
    p.add_argument("--model", required=True,
                   help='JSON object with fields prus|eps, D, ratio')
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--dem", default=None,
                   help="also write the instance's error model to this file")
    p.set_defaults(func=_cmd_lower)

    p = sub.add_parser("sample", help="frame-sample detector outcomes")
    p.add_argument("input")
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--obs", default=None,
                   help="also write observable rows to this file")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("decode", help="MWPM-decode sampled detector rows")
    p.add_argument("--dem", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--num-detectors", type=int, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("sweep", help="run a sweep from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("fit", help="fit a threshold from points.csv")
    p.add_argument("points")
    p.add_argument("--bootstrap", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("report", help="emit points.csv, fit.json and plot.svg")
    p.add_argument("points")
    p.add_argument("--bootstrap", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("optics", help="inspect the interferometer amplitudes")
    p.add_argument("table_command", choices=["table"])
    p.add_argument("--phi", type=float, required=True)
    p.set_defaults(func=_cmd_optics)

    p = sub.add_parser("bench", help="run performance benchmarks")
    p.add_argument("--filter", default="")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CircuitError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
