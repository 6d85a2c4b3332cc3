"""Per-window occupancy metrics: visitation mean/variance and lying proportion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .domain import PostureClass

DEFAULT_COUNTING = frozenset({PostureClass.LYING_IN_BED, PostureClass.STANDING})


@dataclass(frozen=True)
class CountingPolicy:
    classes: frozenset = DEFAULT_COUNTING

    def __post_init__(self):
        object.__setattr__(self, "classes", frozenset(PostureClass(c) for c in self.classes))
        if not self.classes:
            raise ValueError("counting policy needs at least one posture class")

    @classmethod
    def from_tokens(cls, text: str) -> "CountingPolicy":
        toks = [t.strip() for t in text.split(",") if t.strip()]
        return cls(frozenset(PostureClass.from_token(t) for t in toks))

    def tokens(self) -> str:
        return ",".join(sorted(c.token for c in self.classes))


DEFAULT_POLICY = CountingPolicy()


@dataclass(frozen=True)
class WindowMetrics:
    visitation_mean: float
    visitation_variance: float
    lying_proportion: float
    frame_count: int


def person_count(frame, policy: CountingPolicy = DEFAULT_POLICY) -> int:
    classes = policy.classes
    return sum(1 for d in frame.detections if d.posture in classes)


def window_metrics(frames: Iterable, policy: CountingPolicy = DEFAULT_POLICY) -> WindowMetrics:
    """Population mean/variance of per-frame person counts.

    Counts are integers, so the sums are accumulated exactly as Python ints in
    one pass and the variance ``(n*ss - s*s) / n**2`` is rounded only once.
    """
    classes = policy.classes
    lying = PostureClass.LYING_IN_BED
    n = s = ss = n_lying = 0
    for frame in frames:
        c = 0
        has_lying = False
        for d in frame.detections:
            p = d.posture
            if p in classes:
                c += 1
            if p is lying:
                has_lying = True
        n += 1
        s += c
        ss += c * c
        n_lying += has_lying
    if n == 0:
        raise ValueError("empty window")
    return WindowMetrics(s / n, (n * ss - s * s) / (n * n), n_lying / n, n)
