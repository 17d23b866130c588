#!/usr/bin/env python3
"""Erasure thresholds of the three architectures.

Runs the honeycomb memory on both architectures and the CZ-extracted
surface code, fits the threshold of each, and writes one report
directory per sweep. The headline comparison is the ratio between the
native-pair-measurement architecture and the ancilla-based one.
"""

import argparse
import os

import numpy as np

from spoqclab import experiments

SWEEPS = {
    "hc-spoqc2": dict(family="honeycomb", flavor="SPOQC2", sizes=(2, 3, 4),
                      p_grid=tuple(np.round(np.linspace(0.14, 0.30, 9), 4))),
    "hc-spoqc": dict(family="honeycomb", flavor="SPOQC", sizes=(2, 3, 4),
                     p_grid=tuple(np.round(np.linspace(0.03, 0.11, 9), 4))),
    "sc-spoqc": dict(family="surface", flavor="SPOQC", sizes=(3, 5),
                     p_grid=tuple(np.round(np.linspace(0.06, 0.16, 9), 4))),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/erasure")
    ap.add_argument("--instances", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    thresholds = {}
    for name, kw in SWEEPS.items():
        config = experiments.SweepConfig(
            noise_axis="erasure", M=args.instances, N=64, K=10_000,
            seed=args.seed, out_dir=os.path.join(args.out, name), **kw)
        _points, fit, _paths = experiments.run_and_report(
            config, workers=args.workers)
        thresholds[name] = fit
        print(f"{name}: p_th = {fit.threshold:.4f} +- {fit.std:.4f} "
              f"(kept {fit.kept}/{fit.bootstrap})")

    ratio = thresholds["hc-spoqc2"].threshold / thresholds["hc-spoqc"].threshold
    print(f"native pair measurements improve the honeycomb erasure "
          f"threshold by {ratio:.2f}x")


if __name__ == "__main__":
    main()
