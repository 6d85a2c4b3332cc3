#!/usr/bin/env python3
"""Time ingest + analysis of a synthetic cohort of roughly N frames.

    python3 scripts/run_throughput.py --frames 1000000 --threads 4
"""

import argparse
import os
import tempfile
import time

from icuvis import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--frames", type=int, default=1_000_000)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--keep", help="write the cohort and report here instead of a temp dir")
    args = ap.parse_args()

    events = -(-args.frames // 900)
    share = {"pain.no_mild": 0.22, "pain.moderate_severe": 0.14, "acuity.stable": 0.27,
             "acuity.unstable": 0.10, "delirium.non_delirious": 0.18, "delirium.delirious": 0.09}
    counts = {k: max(2, round(events * v)) for k, v in share.items()}
    counts["acuity.stable"] += events - sum(counts.values()) if events > sum(counts.values()) else 0

    base = args.keep or tempfile.mkdtemp(prefix="icuvis-")
    os.makedirs(base, exist_ok=True)
    cfg = os.path.join(base, "synth.cfg")
    with open(cfg, "w") as fh:
        fh.write(f"seed = 1\npatients = {max(10, events // 20)}\nframes_per_window = 900\n")
        for k, n in counts.items():
            fh.write(f"{k}.count = {n}\n")
    cohort, report = os.path.join(base, "cohort"), os.path.join(base, "report")

    t0 = time.perf_counter()
    cli.main(["synth", "--config", cfg, "--out", cohort, "--threads", str(args.threads)])
    t1 = time.perf_counter()
    rc = cli.main(["analyze", "--input-dir", cohort, "--out", report, "--threads", str(args.threads), "--format", "csv"])
    t2 = time.perf_counter()
    with open(os.path.join(cohort, "detections.tsv"), "rb") as fh:
        n = sum(1 for _ in fh)
    print(f"\nsynth {t1 - t0:.1f}s; ingest+analyze {n} frames {t2 - t1:.1f}s (exit {rc}); files in {base}")


if __name__ == "__main__":
    main()
