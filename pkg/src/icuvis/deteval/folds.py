"""Patient-grouped k-fold splits and cross-fold aggregation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..domain import PostureClass
from .matching import IOU_THRESHOLD, EvalSample, UndefinedMetricError, average_precision, match_all, operating_point

DEFAULT_CLASSES = (PostureClass.LYING_IN_BED, PostureClass.STANDING)
METRIC_NAMES = ("ap", "precision", "recall", "f1")
ALL_CLASSES = "all classes"

_CLASS_TITLES = {
    PostureClass.LYING_IN_BED: "Lying in bed",
    PostureClass.STANDING: "Standing",
    PostureClass.SITTING_BED: "Sitting on bed",
    PostureClass.SITTING_CHAIR: "Sitting on chair",
    PostureClass.ASSISTED_MOBILITY: "Assisted mobility",
}


class LeakageError(ValueError):
    """A patient appears in more than one test fold, or in train and test."""


@dataclass(frozen=True)
class FoldSpec:
    index: int
    test: frozenset
    train: frozenset

    def __post_init__(self):
        if self.test & self.train:
            raise LeakageError(f"fold {self.index}: train and test share patients")


def grouped_kfold(patient_ids: Iterable[str], k: int = 5, seed: int = 0) -> list:
    """Seeded shuffle of patients into ``k`` near-equal disjoint test sets."""
    ids = sorted(set(patient_ids))
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > len(ids):
        raise ValueError(f"k={k} exceeds number of patients ({len(ids)})")
    perm = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in perm]
    everyone = frozenset(ids)
    folds = []
    for i, chunk in enumerate(np.array_split(np.arange(len(ids)), k)):
        test = frozenset(shuffled[j] for j in chunk)
        folds.append(FoldSpec(i, test, everyone - test))
    return folds


def check_folds(folds: Sequence[FoldSpec]):
    seen = {}
    for f in folds:
        for pid in f.test:
            if pid in seen:
                raise LeakageError(f"leakage detected: patient {pid} in test folds {seen[pid]} and {f.index}")
            seen[pid] = f.index


def folds_from_assignment(assignment: dict, all_patients: Iterable[str] = ()) -> list:
    """Build folds from ``{fold_index: [patient ids]}``; train is the complement."""
    everyone = frozenset(all_patients) | frozenset(p for ps in assignment.values() for p in ps)
    folds = [FoldSpec(int(i), frozenset(ps), everyone - frozenset(ps)) for i, ps in sorted(assignment.items())]
    check_folds(folds)
    return folds


def read_folds_csv(text: str) -> dict:
    """Parse ``fold,patient_id`` rows (header optional); duplicates are kept for leakage checks."""
    assignment: dict = {}
    pairs = []
    for row in csv.reader(io.StringIO(text)):
        if not row or not "".join(row).strip():
            continue
        if row[0].strip().lower() == "fold":
            continue
        if len(row) != 2:
            raise ValueError(f"folds file: expected 'fold,patient_id', got {row!r}")
        pairs.append((int(row[0]), row[1].strip()))
    for idx, pid in pairs:
        for other, members in assignment.items():
            if pid in members and other != idx:
                raise LeakageError(f"leakage detected: patient {pid} in test folds {other} and {idx}")
        assignment.setdefault(idx, []).append(pid)
    return assignment


@dataclass
class EvalReport:
    classes: tuple
    per_fold: list = field(default_factory=list)  # [{row: {metric: value}}]
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def rows(self) -> list:
        return [c.token for c in self.classes] + [ALL_CLASSES]

    def render_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "statistic", *METRIC_NAMES])
        for row in self.rows:
            for stat, table in (("mean", self.mean), ("std", self.std)):
                w.writerow([row, stat, *(_fmt(table.get(row, {}).get(m)) for m in METRIC_NAMES)])
        for i, fold in enumerate(self.per_fold):
            for row in self.rows:
                w.writerow([row, f"fold{i}", *(_fmt(fold.get(row, {}).get(m)) for m in METRIC_NAMES)])
        return buf.getvalue()

    def render_text(self) -> str:
        header = ["Class", "mAP", "Precision", "Recall", "F1 Score"]
        body = []
        for row in self.rows:
            title = ALL_CLASSES.capitalize() if row == ALL_CLASSES else _CLASS_TITLES[PostureClass.from_token(row)]
            cells = []
            for m in METRIC_NAMES:
                mu, sd = self.mean.get(row, {}).get(m), self.std.get(row, {}).get(m)
                cells.append("n/a" if mu is None else f"{mu:.2f} ({sd:.2f})")
            body.append([title, *cells])
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        lines = [
            f"Detection performance, Mean (STD) across {len(self.per_fold)} folds (population std)",
            "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        ]
        lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in body]
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(line.rstrip() for line in lines) + "\n"


def _fmt(v):
    return "" if v is None else f"{v:.6f}"


def evaluate_fold(samples, classes=DEFAULT_CLASSES, iou_threshold: float = IOU_THRESHOLD, notes=None, label=""):
    out = {}
    for c in classes:
        matches = match_all(samples, c, iou_threshold)
        try:
            ap = average_precision(matches)
            p, r, f1 = operating_point(matches)
        except UndefinedMetricError:
            if notes is not None:
                notes.append(f"{label}class {c.token} has no ground truth; excluded")
            continue
        out[c.token] = {"ap": ap, "precision": p, "recall": r, "f1": f1}
    if out:
        out[ALL_CLASSES] = {m: sum(v[m] for v in out.values()) / len(out) for m in METRIC_NAMES}
    return out


def evaluate_folds(folds: Sequence[Sequence], classes=DEFAULT_CLASSES, iou_threshold: float = IOU_THRESHOLD) -> EvalReport:
    """Per-fold metrics plus cross-fold mean and population std per cell."""
    if len(folds) < 2:
        raise ValueError("need at least two folds")
    classes = tuple(classes)
    report = EvalReport(classes)
    for i, samples in enumerate(folds):
        if not any(g.posture in classes for s in samples for g in s.ground_truth):
            report.notes.append(f"fold {i} has no ground truth; excluded")
            continue
        report.per_fold.append(evaluate_fold(samples, classes, iou_threshold, report.notes, f"fold {i}: "))
    for row in report.rows:
        for m in METRIC_NAMES:
            vals = [f[row][m] for f in report.per_fold if row in f]
            if vals:
                mu = math.fsum(vals) / len(vals)
                report.mean.setdefault(row, {})[m] = mu
                report.std.setdefault(row, {})[m] = math.sqrt(math.fsum((v - mu) ** 2 for v in vals) / len(vals))
    return report


def samples_from_streams(gt_frames: dict, pred_frames: dict):
    """Pair ground-truth and prediction frames by (patient_id, timestamp).

    Only frames present in the ground truth are evaluated.
    """
    samples = {}
    for pid, frames in gt_frames.items():
        preds = {f.timestamp: f.detections for f in pred_frames.get(pid, ())}
        samples[pid] = [EvalSample((pid, f.timestamp), f.detections, preds.get(f.timestamp, ())) for f in frames]
    return samples
