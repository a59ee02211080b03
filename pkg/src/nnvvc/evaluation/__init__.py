"""Quality metrics, Bjontegaard deltas and the ablation driver."""
from .bd import BdResult, RdCurve, RdPoint, bd_metric, enforce_monotonic
from .experiment import (ALL_CONFIGS, ANCHOR, CONFIGS, CSV_FIELDS, METRICS, Report, complexity_rows,
                         evaluate_system, format_complexity, read_rows, report_from_rows, run_experiment)
from .metrics import box_iou, detect_shapes, feature_fidelity, map_score, psnr, sequence_map

__all__ = [
    "ALL_CONFIGS", "ANCHOR", "BdResult", "CONFIGS", "CSV_FIELDS", "METRICS", "RdCurve", "RdPoint", "Report",
    "bd_metric", "box_iou", "complexity_rows", "detect_shapes", "enforce_monotonic", "evaluate_system", "feature_fidelity",
    "format_complexity", "map_score", "psnr", "read_rows", "report_from_rows", "run_experiment",
    "sequence_map",
]
