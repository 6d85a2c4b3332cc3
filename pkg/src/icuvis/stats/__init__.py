from .adjust import adjust, bh_adjust, bonferroni_adjust
from .normality import dagostino_k2
from .rank import DegenerateSampleError, TestResult, kruskal_wallis, mann_whitney_u, rank_with_ties, tie_term
from .special import chi2_sf, gammaincc, normal_sf

__all__ = [
    "DegenerateSampleError",
    "TestResult",
    "adjust",
    "bh_adjust",
    "bonferroni_adjust",
    "chi2_sf",
    "dagostino_k2",
    "gammaincc",
    "kruskal_wallis",
    "mann_whitney_u",
    "normal_sf",
    "rank_with_ties",
    "tie_term",
]
