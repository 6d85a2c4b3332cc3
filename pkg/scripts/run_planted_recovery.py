#!/usr/bin/env python3
"""Repeat planted-effect recovery for one outcome over a range of seeds.

    python3 scripts/run_planted_recovery.py acuity --runs 20
    python3 scripts/run_planted_recovery.py pain --runs 20 --counts 1672,627
    python3 scripts/run_planted_recovery.py acuity --targets 1.6,1.6 --runs 100   # null
"""

import argparse
import time

from icuvis.align import build_windows
from icuvis.domain import EventKind
from icuvis.report import Metric, Stratum, measure_windows, run_association
from icuvis.synth import GROUP_LABELS, DEFAULT_TARGETS, GroupSpec, OutcomeSchedule, SynthConfig, generate_cohort, plant_effect

REFERENCE_COUNTS = {
    EventKind.ACUITY: (579, 260),
    EventKind.PAIN: (1672, 627),
    EventKind.DELIRIUM: (300, 120),
}


def pair(text, conv):
    a, b = (conv(x) for x in text.split(","))
    return a, b


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("outcome", choices=[k.value for k in EventKind])
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--seed0", type=int, default=0)
    ap.add_argument("--counts", help="reference,comparison window counts")
    ap.add_argument("--targets", help="reference,comparison occupancy targets")
    ap.add_argument("--frames", type=int, default=900)
    ap.add_argument("--dwell", type=float, default=2.0, help="mean visitor dwell, minutes")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    kind = EventKind(args.outcome)
    labels = GROUP_LABELS[kind]
    counts = pair(args.counts, int) if args.counts else REFERENCE_COUNTS[kind]
    targets = pair(args.targets, float) if args.targets else tuple(DEFAULT_TARGETS[kind][g] for g in labels)
    print(f"{kind.value}: {labels[0]} n={counts[0]} target={targets[0]}  {labels[1]} n={counts[1]} target={targets[1]}")

    sig = 0
    for run in range(args.runs):
        seed = args.seed0 + run
        t0 = time.perf_counter()
        sched = OutcomeSchedule(tuple(GroupSpec(g, n, 0.0, args.dwell) for g, n in zip(labels, counts)))
        cfg = SynthConfig(seed=seed, patients=max(1, sum(counts) // 10), frames_per_window=args.frames, outcomes={kind: sched})
        cfg = plant_effect(cfg, kind, dict(zip(labels, targets)))
        bundle, _ = generate_cohort(cfg, threads=args.threads)
        windows, _ = build_windows(bundle)
        rows = run_association(measure_windows(windows, threads=args.threads), kind)
        row = next(r for r in rows if r.metric is Metric.VISITATION_AVERAGE and r.stratum is Stratum.COMBINED)
        a, b = row.groups
        p = row.test.p_value
        sig += p < 0.05
        print(f"seed {seed:4d}  {a.mean:.3f} ({a.std:.3f})  vs  {b.mean:.3f} ({b.std:.3f})  p={p:.3g}  {time.perf_counter() - t0:.1f}s")
    print(f"p < 0.05 in {sig}/{args.runs} runs")


if __name__ == "__main__":
    main()
