"""Command-line entry point.

Exit codes: 0 success, 1 domain failure (rejects, no windows, leakage,
infeasible plant), 2 I/O or usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import replace

from . import config as cfgmod
from .align import build_windows, parse_offsets
from .deteval import (
    LeakageError,
    evaluate_folds,
    folds_from_assignment,
    grouped_kfold,
    read_folds_csv,
    samples_from_streams,
)
from .domain import EventKind
from .ingest import load_cohort, parse_detection_stream
from .metrics import CountingPolicy
from .report import (
    histogram_bins,
    measure_windows,
    render_four_group,
    render_report,
    run_association,
    run_pain_four_group,
)
from .synth import generate_cohort, write_cohort

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _err(msg: str):
    print(f"icuvis: {msg}", file=sys.stderr)


def _add_inputs(p):
    p.add_argument("--input-dir", help="directory holding detections.tsv, pain.csv, acuity.csv, delirium.csv")
    p.add_argument("--detections")
    p.add_argument("--pain")
    p.add_argument("--acuity")
    p.add_argument("--delirium")


def _add_common(p):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="icuvis", description="ICU visitation and mobility analytics")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="parse inputs and report rejects, gaps and orphans")
    _add_inputs(v)
    _add_common(v)

    a = sub.add_parser("analyze", help="window alignment, metrics, association tables")
    _add_inputs(a)
    _add_common(a)
    a.add_argument("--out", required=True)
    a.add_argument("--window-pain")
    a.add_argument("--window-delirium")
    a.add_argument("--window-acuity")
    a.add_argument("--min-frames", type=int)
    a.add_argument("--counting-classes")
    a.add_argument("--tz", help="facility time zone for day/night (offset or IANA name)")
    a.add_argument("--adjust", choices=("none", "bh", "bonferroni"))
    a.add_argument("--format", choices=("csv", "text"), default="text", help="format echoed to stdout")

    d = sub.add_parser("deteval", help="grouped k-fold detection evaluation")
    _add_common(d)
    d.add_argument("--pred", required=True)
    d.add_argument("--gt", required=True)
    d.add_argument("--folds")
    d.add_argument("--kfold", type=int, default=5)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--iou", type=float, default=0.5)
    d.add_argument("--out")
    d.add_argument("--format", choices=("csv", "text"), default="text")

    s = sub.add_parser("synth", help="generate a seeded synthetic cohort")
    _add_common(s)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    return ap


def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from None


def _kv(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    try:
        return cfgmod.read_kv(args.config)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read config {args.config}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise _Fail(EXIT_IO, str(exc)) from None


def _run_config(args) -> cfgmod.RunConfig:
    rc = cfgmod.RunConfig(threads=max(1, args.threads))
    try:
        rc = cfgmod.apply_analysis_keys(rc, _kv(args))
    except ValueError as exc:
        raise _Fail(EXIT_IO, f"bad config: {exc}") from None
    inputs = {}
    if getattr(args, "input_dir", None):
        if not os.path.isdir(args.input_dir):
            raise _Fail(EXIT_IO, f"no such directory {args.input_dir}")
        inputs.update(cfgmod.resolve_input_dir(args.input_dir))
    for role in ("detections", "pain", "acuity", "delirium"):
        if getattr(args, role, None):
            inputs[role] = getattr(args, role)
    rc = replace(rc, **inputs)
    try:
        policy = rc.policy
        changes = {}
        for kind in EventKind:
            val = getattr(args, f"window_{kind.value}", None)
            if val:
                changes[kind.value] = parse_offsets(val)
        if getattr(args, "min_frames", None) is not None:
            changes["min_frames"] = args.min_frames
        if changes:
            policy = replace(policy, **changes)
        updates = {"policy": policy}
        if getattr(args, "counting_classes", None):
            updates["counting"] = CountingPolicy.from_tokens(args.counting_classes)
        if getattr(args, "tz", None):
            updates["tz"] = cfgmod.parse_tz(args.tz)
        if getattr(args, "adjust", None):
            updates["adjust"] = args.adjust
        rc = replace(rc, **updates)
    except (ValueError, KeyError) as exc:
        raise _Fail(EXIT_IO, f"bad option: {exc}") from None
    if rc.adjust not in ("none", "bh", "bonferroni"):
        raise _Fail(EXIT_IO, f"bad adjustment {rc.adjust!r}")
    if not rc.inputs():
        raise _Fail(EXIT_IO, "no input files given")
    return rc


def _load(rc: cfgmod.RunConfig):
    raw = {role: _read_bytes(path) for role, path in rc.inputs().items()}
    return load_cohort(**raw)


def cmd_validate(args) -> int:
    rc = _run_config(args)
    _, report = _load(rc)
    sys.stdout.write(report.render())
    return EXIT_OK if report.ok else EXIT_FAIL


def _write(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from None


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot create {path}: {exc.strerror or exc}") from None


def analyze(rc: cfgmod.RunConfig):
    """Run the whole analysis; returns the rendered artifacts by filename."""
    bundle, report = _load(rc)
    windows, excluded = build_windows(bundle, rc.policy, rc.tz)
    if not windows:
        raise _Fail(EXIT_FAIL, "no admissible windows")
    results = measure_windows(windows, rc.counting, rc.threads)
    rows = []
    for kind in EventKind:
        if any(r.kind is kind for r in results):
            rows += run_association(results, kind, rc.adjust)
    text = render_report(rows, "text")
    try:
        four = run_pain_four_group(results)
        text += "\n" + render_four_group(four)
    except ValueError:
        pass
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("kind", "patient_id", "timestamp", "reason", "frame_count"))
    for e in excluded:
        w.writerow((e.event.kind.value, e.event.patient_id, e.event.timestamp.isoformat(), e.reason, e.frame_count))
    return {
        "associations.csv": render_report(rows, "csv"),
        "associations.txt": text,
        "histogram_bins.csv": histogram_bins(results),
        "exclusions.csv": buf.getvalue(),
    }, report


def cmd_analyze(args) -> int:
    rc = _run_config(args)
    artifacts, report = analyze(rc)
    _ensure_dir(args.out)
    for name, text in artifacts.items():
        _write(os.path.join(args.out, name), text)
    if report.rejects:
        _err(f"{len(report.rejects)} input lines rejected (run 'icuvis validate' for details)")
    sys.stdout.write(artifacts["associations.csv" if args.format == "csv" else "associations.txt"])
    return EXIT_OK


def cmd_deteval(args) -> int:
    gt, gt_rep = parse_detection_stream(_read_bytes(args.gt), name="gt")
    pred, pred_rep = parse_detection_stream(_read_bytes(args.pred), name="pred")
    for rep in (gt_rep, pred_rep):
        if rep.rejects:
            _err(f"{len(rep.rejects)} lines rejected in {rep.rejects[0].source}")
    patients = sorted(gt)
    try:
        if args.folds:
            text = _read_bytes(args.folds).decode("utf-8", "replace")
            folds = folds_from_assignment(read_folds_csv(text), patients)
        else:
            folds = grouped_kfold(patients, args.kfold, args.seed)
    except LeakageError as exc:
        _err(str(exc) if "leakage detected" in str(exc) else f"leakage detected: {exc}")
        return EXIT_FAIL
    except ValueError as exc:
        _err(str(exc))
        return EXIT_FAIL
    by_patient = samples_from_streams(gt, pred)
    fold_samples = [[s for pid in sorted(f.test) for s in by_patient.get(pid, ())] for f in folds]
    try:
        report = evaluate_folds(fold_samples, iou_threshold=args.iou)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_FAIL
    csv_text, txt = report.render_csv(), report.render_text()
    if args.out:
        _ensure_dir(args.out)
        _write(os.path.join(args.out, "deteval.csv"), csv_text)
        _write(os.path.join(args.out, "deteval.txt"), txt)
    sys.stdout.write(csv_text if args.format == "csv" else txt)
    return EXIT_OK


def cmd_synth(args) -> int:
    kv = _kv(args)
    try:
        config = cfgmod.synth_config_from_kv(kv, seed=args.seed)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_FAIL
    bundle, ledger = generate_cohort(config, threads=max(1, args.threads))
    _ensure_dir(args.out)
    try:
        paths = write_cohort(bundle, ledger, args.out)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot write cohort: {exc.strerror or exc}") from None
    n_frames = sum(len(f) for f in bundle.frames.values())
    print(f"wrote {n_frames} frames, {len(ledger)} events to {args.out}")
    for role, p in paths.items():
        print(f"  {getattr(role, 'value', role)}: {p}")
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "analyze": cmd_analyze, "deteval": cmd_deteval, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_IO if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except _Fail as exc:
        _err(str(exc))
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
