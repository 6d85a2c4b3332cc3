"""Rank-based two-sample and k-sample tests with tie correction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .special import chi2_sf, normal_sf


class DegenerateSampleError(ValueError):
    """The pooled data carry no rank information (e.g. every value tied)."""


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n: tuple
    method: str
    notes: tuple = ()

    __test__ = False  # not a pytest class


def _as_finite(values, what="values") -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"{what} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must be finite (NaN/inf found)")
    return arr


def rank_with_ties(values) -> np.ndarray:
    """Ranks 1..N in input order; tied values share the mean of their block."""
    x = _as_finite(values)
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    # block boundaries of equal values in sorted order
    starts = np.flatnonzero(np.r_[True, sx[1:] != sx[:-1]])
    ends = np.r_[starts[1:], sx.size]
    avg = (starts + ends + 1) / 2.0  # mean of ranks starts+1 .. ends
    sorted_ranks = np.repeat(avg, ends - starts)
    ranks = np.empty_like(sorted_ranks)
    ranks[order] = sorted_ranks
    return ranks


def tie_term(values) -> float:
    """Sum of ``t**3 - t`` over tie blocks."""
    _, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
    t = counts.astype(float)
    return float(np.sum(t**3 - t))


def mann_whitney_u(a: Sequence[float], b: Sequence[float], continuity: bool = True) -> TestResult:
    """Two-sided Mann-Whitney U test, normal approximation.

    The reported statistic is U for ``a``: the number of (a_i, b_j) pairs with
    a_i > b_j, ties counting one half.
    """
    x = _as_finite(a, "a")
    y = _as_finite(b, "b")
    n1, n2 = int(x.size), int(y.size)
    pooled = np.concatenate([x, y])
    ranks = rank_with_ties(pooled)
    r1 = float(np.sum(ranks[:n1]))
    u1 = r1 - n1 * (n1 + 1) / 2.0
    n = n1 + n2
    ties = tie_term(pooled)
    var = n1 * n2 / 12.0 * ((n + 1) - (ties / (n * (n - 1)) if n > 1 else 0.0))
    if not var > 0:
        raise DegenerateSampleError("degenerate: zero rank variance")
    dev = abs(u1 - n1 * n2 / 2.0)
    if continuity:
        dev = max(dev - 0.5, 0.0)
    z = dev / math.sqrt(var)
    p = min(1.0, 2.0 * normal_sf(z))
    notes = []
    if ties:
        notes.append("tie correction applied")
    if continuity:
        notes.append("continuity correction")
    return TestResult(u1, p, (n1, n2), "mann-whitney-u", tuple(notes))


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> TestResult:
    """Kruskal-Wallis H test with tie correction; chi-squared reference, k-1 df."""
    arrays = [_as_finite(g, f"group {i}") for i, g in enumerate(groups)]
    if len(arrays) < 2:
        raise ValueError("need at least two groups")
    sizes = [g.size for g in arrays]
    pooled = np.concatenate(arrays)
    n = int(pooled.size)
    ranks = rank_with_ties(pooled)
    bounds = np.cumsum([0] + sizes)
    ssum = sum(float(np.sum(ranks[lo:hi])) ** 2 / (hi - lo) for lo, hi in zip(bounds[:-1], bounds[1:]))
    h = 12.0 / (n * (n + 1)) * ssum - 3.0 * (n + 1)
    ties = tie_term(pooled)
    correction = 1.0 - ties / (n**3 - n)
    if not correction > 0:
        raise DegenerateSampleError("degenerate: all pooled values identical")
    h = max(float(h) / correction, 0.0)
    notes = ("tie correction applied",) if ties else ()
    return TestResult(h, chi2_sf(h, len(arrays) - 1), tuple(sizes), "kruskal-wallis", notes)
