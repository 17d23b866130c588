#!/usr/bin/env python3
"""Decoherence and distinguishability thresholds of the honeycomb memory.

Sweeps the two unheralded noise axes on the native-pair-measurement
architecture and fits the crossing of the distance-4 and distance-8
curves.
"""

import argparse
import os

import numpy as np

from spoqclab import experiments

GRID = tuple(np.round(np.linspace(0.010, 0.034, 7), 4))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/pauli")
    ap.add_argument("--shots", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    for axis in ("decoherence", "distinguishability"):
        config = experiments.SweepConfig(
            family="honeycomb", flavor="SPOQC2", sizes=(2, 4),
            noise_axis=axis, p_grid=GRID, M=1, N=args.shots, K=10_000,
            seed=args.seed, out_dir=os.path.join(args.out, axis))
        _points, fit, _paths = experiments.run_and_report(
            config, workers=args.workers)
        print(f"{axis}: p_th = {fit.threshold:.4f} +- {fit.std:.4f} "
              f"(kept {fit.kept}/{fit.bootstrap})")


if __name__ == "__main__":
    main()
