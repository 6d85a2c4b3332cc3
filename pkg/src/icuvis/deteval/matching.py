"""Greedy prediction-to-truth matching and precision/recall summaries."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import groupby
from typing import Iterable, Sequence

from ..domain import PostureClass
from .geometry import iou

IOU_THRESHOLD = 0.5


class UndefinedMetricError(ValueError):
    """The class has no ground-truth instances, so AP/recall are undefined."""


@dataclass(frozen=True)
class EvalSample:
    frame_id: object
    ground_truth: tuple = ()
    predictions: tuple = ()


@dataclass(frozen=True)
class MatchResult:
    tp: tuple  # confidences of true positives
    fp: tuple  # confidences of false positives
    fn: int
    n_gt: int

    def scored(self):
        return [(c, True) for c in self.tp] + [(c, False) for c in self.fp]


def match_detections(sample: EvalSample, posture: PostureClass, iou_threshold: float = IOU_THRESHOLD) -> MatchResult:
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError("iou_threshold must lie in (0, 1]")
    gts = [g.bbox for g in sample.ground_truth if g.posture is posture]
    preds = [p for p in sample.predictions if p.posture is posture]
    overlaps = [[iou(p.bbox, g) for g in gts] for p in preds]
    best = [max(row, default=0.0) for row in overlaps]
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, -best[i], i))
    claimed = [False] * len(gts)
    tp, fp = [], []
    for i in order:
        pick, pick_iou = -1, iou_threshold
        for j, o in enumerate(overlaps[i]):
            if not claimed[j] and o >= pick_iou and (pick < 0 or o > pick_iou):
                pick, pick_iou = j, o
        if pick >= 0:
            claimed[pick] = True
            tp.append(preds[i].confidence)
        else:
            fp.append(preds[i].confidence)
    return MatchResult(tuple(tp), tuple(fp), claimed.count(False), len(gts))


def _sweep(matches: Iterable[MatchResult]):
    """Cumulative (threshold, tp, fp) at each distinct confidence, high to low.

    Predictions sharing a confidence enter the curve together, which makes the
    result independent of the order frames were supplied in.
    """
    matches = list(matches)
    n_gt = sum(m.n_gt for m in matches)
    scored = sorted((s for m in matches for s in m.scored()), key=lambda s: -s[0])
    points = []
    tp = fp = 0
    for conf, block in groupby(scored, key=lambda s: s[0]):
        for _, hit in block:
            if hit:
                tp += 1
            else:
                fp += 1
        points.append((conf, tp, fp))
    return n_gt, points


def average_precision(matches: Iterable[MatchResult]) -> float:
    """All-points interpolated area under the precision-recall curve."""
    n_gt, points = _sweep(matches)
    if n_gt == 0:
        raise UndefinedMetricError("no ground truth for class")
    if not points:
        return 0.0
    recall = [tp / n_gt for _, tp, _ in points]
    precision = [tp / (tp + fp) for _, tp, fp in points]
    # make precision monotone non-increasing in recall
    for i in range(len(precision) - 2, -1, -1):
        precision[i] = max(precision[i], precision[i + 1])
    ap, prev_r = 0.0, 0.0
    for r, p in zip(recall, precision):
        ap += (r - prev_r) * p
        prev_r = r
    return ap


def operating_point(matches: Iterable[MatchResult]) -> tuple:
    """(precision, recall, f1) at the confidence threshold maximizing F1.

    Ties go to the lower threshold. No predictions gives (0, 0, 0).
    """
    n_gt, points = _sweep(matches)
    if n_gt == 0:
        raise UndefinedMetricError("no ground truth for class")
    best = (0.0, 0.0, 0.0)
    best_f1 = -1.0
    for _, tp, fp in points:
        p = tp / (tp + fp)
        r = tp / n_gt
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        if f1 >= best_f1:
            best_f1, best = f1, (p, r, f1)
    return best


def match_all(samples: Sequence[EvalSample], posture: PostureClass, iou_threshold: float = IOU_THRESHOLD):
    return [match_detections(s, posture, iou_threshold) for s in samples]
