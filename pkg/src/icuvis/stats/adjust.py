"""Multiple-comparison p-value adjustment."""

from __future__ import annotations

import numpy as np

METHODS = ("none", "bh", "bonferroni")


def _check(p_values) -> np.ndarray:
    p = np.asarray(p_values, dtype=float).ravel()
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    return p


def bh_adjust(p_values) -> list:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = _check(p_values)
    m = p.size
    if m == 0:
        return []
    order = np.argsort(p, kind="mergesort")
    scaled = p[order] * m / np.arange(1, m + 1)
    # running minimum from the largest p downwards enforces monotonicity
    adj_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adj_sorted, 1.0)
    return out.tolist()


def bonferroni_adjust(p_values) -> list:
    p = _check(p_values)
    return np.minimum(p * p.size, 1.0).tolist()


def adjust(p_values, method: str = "bh") -> list:
    if method == "bh":
        return bh_adjust(p_values)
    if method == "bonferroni":
        return bonferroni_adjust(p_values)
    if method == "none":
        return _check(p_values).tolist()
    raise ValueError(f"unknown adjustment {method!r}; choose from {METHODS}")
