#!/usr/bin/env python3
"""Hardware resource comparison of the two architectures.

Prints, for each lattice size, the spin and photonic-module counts of
the ancilla-based and native-pair-measurement layouts.
"""

import argparse

from spoqclab.codes import CodeSpec, resource_count


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-size", type=int, default=10)
    args = ap.parse_args()

    print(f"{'L':>3} {'spins':>8} {'modules':>8} {'spins':>8} {'modules':>8} "
          f"{'spin save':>10} {'module save':>12}")
    print(f"{'':>3} {'(ancilla)':>17} {'(native pairs)':>17}")
    for L in range(2, args.max_size + 1):
        spins_a, mods_a = resource_count(CodeSpec("honeycomb", L, flavor="SPOQC"))
        spins_b, mods_b = resource_count(CodeSpec("honeycomb", L, flavor="SPOQC2"))
        print(f"{L:>3} {spins_a:>8} {mods_a:>8} {spins_b:>8} {mods_b:>8} "
              f"{1 - spins_b / spins_a:>10.0%} {1 - mods_b / mods_a:>12.0%}")


if __name__ == "__main__":
    main()
