#!/usr/bin/env python3
"""Worst gap between the normal-approximation and exact Mann-Whitney p.

Enumerates every untied dataset for n1, n2 <= N and prints, per size pair,
the largest |p_approx - p_exact|, with and without continuity correction.

    python3 scripts/mwu_small_sample_gap.py --max-n 7
"""

import argparse
import itertools
from collections import Counter

from icuvis.stats import mann_whitney_u


def worst_gap(n1, n2, continuity):
    pooled = range(1, n1 + n2 + 1)
    subsets = list(itertools.combinations(pooled, n1))
    dist = Counter(sum(s) - n1 * (n1 + 1) // 2 for s in subsets)
    centre = n1 * n2 / 2
    worst = 0.0
    for s in subsets:
        b = [r for r in pooled if r not in s]
        res = mann_whitney_u(list(s), b, continuity=continuity)
        dev = abs(res.statistic - centre)
        exact = sum(c for u, c in dist.items() if abs(u - centre) >= dev) / len(subsets)
        worst = max(worst, abs(res.p_value - exact))
    return worst


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--max-n", type=int, default=7)
    ap.add_argument("--bound", type=float, default=0.05)
    args = ap.parse_args()
    over = []
    print("n1 n2  gap(cc)  gap(no cc)")
    for n1 in range(1, args.max_n + 1):
        for n2 in range(1, args.max_n + 1):
            g1, g0 = worst_gap(n1, n2, True), worst_gap(n1, n2, False)
            flag = " *" if g1 > args.bound else ""
            print(f"{n1:2d} {n2:2d}  {g1:.4f}   {g0:.4f}{flag}")
            if g1 > args.bound:
                over.append((n1, n2))
    print(f"\n{len(over)} size pairs exceed {args.bound} with continuity correction: {over}")


if __name__ == "__main__":
    main()
