"""D'Agostino-Pearson omnibus normality test."""

from __future__ import annotations

import math

import numpy as np

from .rank import DegenerateSampleError, TestResult, _as_finite
from .special import chi2_sf

MIN_OMNIBUS_N = 20


def _moments(x: np.ndarray):
    d = x - x.mean()
    m2 = float(np.mean(d * d))
    if not m2 > 0:
        raise DegenerateSampleError("zero variance")
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    return m3 / m2**1.5, m4 / m2**2


def skewness_z(b1: float, n: int) -> float:
    """D'Agostino's normalizing transform of sample skewness sqrt(b1)."""
    y = b1 * math.sqrt((n + 1) * (n + 3) / (6.0 * (n - 2)))
    beta2 = 3.0 * (n * n + 27 * n - 70) * (n + 1) * (n + 3) / ((n - 2.0) * (n + 5) * (n + 7) * (n + 9))
    w2 = -1.0 + math.sqrt(2.0 * (beta2 - 1.0))
    delta = 1.0 / math.sqrt(0.5 * math.log(w2))
    alpha = math.sqrt(2.0 / (w2 - 1.0))
    r = y / alpha
    return delta * math.log(r + math.sqrt(r * r + 1.0))


def kurtosis_z(b2: float, n: int) -> float:
    """Anscombe-Glynn transform of sample kurtosis b2 (non-excess)."""
    mean = 3.0 * (n - 1) / (n + 1)
    var = 24.0 * n * (n - 2) * (n - 3) / ((n + 1.0) ** 2 * (n + 3) * (n + 5))
    x = (b2 - mean) / math.sqrt(var)
    sqrt_beta1 = (
        6.0 * (n * n - 5 * n + 2) / ((n + 7.0) * (n + 9))
        * math.sqrt(6.0 * (n + 3) * (n + 5) / (n * (n - 2.0) * (n - 3)))
    )
    a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + math.sqrt(1.0 + 4.0 / sqrt_beta1**2))
    term1 = 1.0 - 2.0 / (9.0 * a)
    denom = 1.0 + x * math.sqrt(2.0 / (a - 4.0))
    if denom == 0:
        term2 = 0.0
    else:
        term2 = math.copysign(abs((1.0 - 2.0 / a) / denom) ** (1.0 / 3.0), denom)
    return (term1 - term2) / math.sqrt(2.0 / (9.0 * a))


def dagostino_k2(sample) -> TestResult:
    """Omnibus K^2 = Z(skew)^2 + Z(kurt)^2, chi-squared with 2 df."""
    x = _as_finite(sample, "sample")
    n = x.size
    if n < MIN_OMNIBUS_N:
        raise ValueError(f"sample too small for omnibus test (n={n} < {MIN_OMNIBUS_N})")
    b1, b2 = _moments(x)
    zs = skewness_z(b1, n)
    zk = kurtosis_z(b2, n)
    k2 = zs * zs + zk * zk
    return TestResult(k2, chi2_sf(k2, 2), (n,), "dagostino-pearson", (f"z_skew={zs:.4f}", f"z_kurt={zk:.4f}"))
