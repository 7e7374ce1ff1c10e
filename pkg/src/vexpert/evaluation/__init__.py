# vexpert evaluation module

from .diagnostic import DiagnosticReport, bias_diagnostic, histogram, perturb
from .metrics import (
    dvc_loc_metrics,
    gqa_metrics,
    hd_metrics,
    iop_1d,
    iou_1d,
    map_at_iou,
    recall_at_iou,
)
from .report import EvalReport, SampleRecord, metrics_table, read_report, write_report
from .runner import Evaluator

__all__ = [
    "DiagnosticReport",
    "bias_diagnostic",
    "histogram",
    "perturb",
    "dvc_loc_metrics",
    "gqa_metrics",
    "hd_metrics",
    "iop_1d",
    "iou_1d",
    "map_at_iou",
    "recall_at_iou",
    "EvalReport",
    "SampleRecord",
    "metrics_table",
    "read_report",
    "write_report",
    "Evaluator",
]
