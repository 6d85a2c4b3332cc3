"""Box overlap measures."""

from __future__ import annotations

import math


def iou(a, b) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a.x_max - a.x_min) * (a.y_max - a.y_min) + (b.x_max - b.x_min) * (b.y_max - b.y_min) - inter
    return inter / union


def ciou(pred, gt) -> float:
    """Complete IoU: IoU minus centre-distance and aspect-ratio penalties."""
    w, h = pred.x_max - pred.x_min, pred.y_max - pred.y_min
    wg, hg = gt.x_max - gt.x_min, gt.y_max - gt.y_min
    if not (w > 0 and h > 0 and wg > 0 and hg > 0):
        raise ValueError("zero-area box")
    overlap = iou(pred, gt)
    rho2 = ((pred.x_min + pred.x_max) / 2 - (gt.x_min + gt.x_max) / 2) ** 2 + (
        (pred.y_min + pred.y_max) / 2 - (gt.y_min + gt.y_max) / 2
    ) ** 2
    cw = max(pred.x_max, gt.x_max) - min(pred.x_min, gt.x_min)
    ch = max(pred.y_max, gt.y_max) - min(pred.y_min, gt.y_min)
    c2 = cw * cw + ch * ch
    v = 4.0 / math.pi**2 * (math.atan(wg / hg) - math.atan(w / h)) ** 2
    alpha = v / ((1.0 - overlap) + v) if v > 0 else 0.0
    return overlap - rho2 / c2 - alpha * v
