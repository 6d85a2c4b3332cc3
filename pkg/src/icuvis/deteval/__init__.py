from .folds import (
    EvalReport,
    FoldSpec,
    LeakageError,
    check_folds,
    evaluate_fold,
    evaluate_folds,
    folds_from_assignment,
    grouped_kfold,
    read_folds_csv,
    samples_from_streams,
)
from .geometry import ciou, iou
from .matching import (
    EvalSample,
    MatchResult,
    UndefinedMetricError,
    average_precision,
    match_all,
    match_detections,
    operating_point,
)

__all__ = [
    "EvalReport",
    "EvalSample",
    "FoldSpec",
    "LeakageError",
    "MatchResult",
    "UndefinedMetricError",
    "average_precision",
    "check_folds",
    "ciou",
    "evaluate_fold",
    "evaluate_folds",
    "folds_from_assignment",
    "grouped_kfold",
    "iou",
    "match_all",
    "match_detections",
    "operating_point",
    "read_folds_csv",
    "samples_from_streams",
]
