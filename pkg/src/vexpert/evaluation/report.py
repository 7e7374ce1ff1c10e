# vexpert - Evaluation reports
# Copyright (C) 2026 Free & Fair

"""
EvalReport and its on-disk form.

    report.json                 full report (schema 1)
    samples.csv                 one row per sample
    histogram_<perturbation>.csv  diagnostic histograms, one row per start bin

Text views (metric table, compression tree) are rendered here for the CLI.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from ..errors import EvalError
from ..schema.types import EvalTask, Perturbation, Segment
from ..video.compress import CompressTrace
from .diagnostic import DiagnosticReport

SCHEMA_VERSION = 1
REPORT_FILE = "report.json"
SAMPLES_FILE = "samples.csv"

SAMPLE_COLUMNS = [
    "id", "pred", "gt", "iou", "iop", "correct", "pred_answer", "answer", "hit", "ap", "count_match", "pair_ious",
]


class SampleRecord(BaseModel):
    """
    Per-sample evaluation record. Every aggregate in EvalReport.metrics is
    recomputable from these rows:

        tg       R1@t and mIoU from iou; mAP from pred and gt
        hd       HIT@1 as the mean of hit; HD-mAP as the mean of the non-null ap
        dvc_loc  count_fidelity from count_match; pair_mIoU and Recall@t from
                 pair_ious (Recall divides by the total number of gt segments)
        gqa      Acc@QA from correct; IoP/IoU from iop and iou; Acc@GQA from both
    """

    id: str
    pred: list[Segment] = Field(default_factory=list, description="Ranked (tg, hd) or per-<LOC> (dvc_loc) predictions")
    gt: list[Segment] = Field(default_factory=list)
    iou: Optional[float] = None
    iop: Optional[float] = None
    correct: Optional[bool] = None
    pred_answer: Optional[str] = None
    answer: Optional[str] = None
    hit: Optional[float] = Field(default=None, description="HIT@1 contribution (hd)")
    ap: Optional[float] = Field(default=None, description="Clip-ranking AP (hd); null when no clip is Very Good")
    count_match: Optional[bool] = Field(default=None, description="|<LOC>| == |gt| (dvc_loc)")
    pair_ious: Optional[list[float]] = Field(default=None, description="IoU of each order-matched <LOC> pair (dvc_loc)")


class EvalReport(BaseModel):
    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    task: EvalTask
    perturbation: Perturbation = Perturbation.NONE
    checkpoint: Optional[str] = None
    n_samples: int = 0
    metrics: dict[str, float] = Field(default_factory=dict)
    samples: list[SampleRecord] = Field(default_factory=list)
    diagnostic: Optional[DiagnosticReport] = None

    model_config = ConfigDict(populate_by_name=True)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True), indent=2, sort_keys=True) + "\n"


# =============================================================================
# Files
# =============================================================================

def _segments_cell(segments: list[Segment]) -> str:
    return ";".join(f"{s.start:g}-{s.end:g}" for s in segments)


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def samples_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SAMPLE_COLUMNS)
    for s in report.samples:
        writer.writerow([
            s.id, _segments_cell(s.pred), _segments_cell(s.gt),
            _cell(s.iou), _cell(s.iop), _cell(s.correct),
            _cell(s.pred_answer), _cell(s.answer), _cell(s.hit), _cell(s.ap), _cell(s.count_match),
            "" if s.pair_ious is None else ";".join(repr(v) for v in s.pair_ious),
        ])
    return buf.getvalue()


def histogram_csv(hist: list[list[float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["start_bin"] + [f"end_{j}" for j in range(len(hist[0]) if hist else 0)])
    for i, row in enumerate(hist):
        writer.writerow([i] + [repr(float(v)) for v in row])
    return buf.getvalue()


def write_report(report: EvalReport, out_dir: Path | str) -> list[Path]:
    """Write the JSON report, the per-sample CSV and one CSV per histogram."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / REPORT_FILE, out / SAMPLES_FILE]
    written[0].write_text(report.to_json(), encoding="utf-8")
    written[1].write_text(samples_csv(report), encoding="utf-8")
    if report.diagnostic is not None:
        for name, result in sorted(report.diagnostic.results.items()):
            path = out / f"histogram_{name}.csv"
            path.write_text(histogram_csv(result.histogram), encoding="utf-8")
            written.append(path)
    return written


def read_report(path: Path | str) -> EvalReport:
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_FILE
    if not path.exists():
        raise EvalError(f"no report at {path}")
    data = json.loads(path.read_text(encoding="utf-8"))
    if data.get("schema") != SCHEMA_VERSION:
        raise EvalError(f"{path}: unsupported report schema {data.get('schema')!r}")
    return EvalReport.model_validate(data)


# =============================================================================
# Text views
# =============================================================================

def metrics_table(report: EvalReport) -> str:
    """
    Display metrics in table format.

    Example output:
        +----------------------+--------------+
        | Metric               | Value        |
        +======================+==============+
        | R1@0.3               | 0.6250       |
        +----------------------+--------------+
    """
    name_width, value_width = 20, 12
    sep = f"+{'-' * (name_width + 2)}+{'-' * (value_width + 2)}+"
    lines = [
        sep,
        f"| {'Metric'.ljust(name_width)} | {'Value'.ljust(value_width)} |",
        f"+{'=' * (name_width + 2)}+{'=' * (value_width + 2)}+",
    ]
    rows = list(report.metrics.items())
    if report.diagnostic is not None:
        for name, result in report.diagnostic.results.items():
            rows.append((f"mode_share[{name}]", result.mode_share))
        if report.diagnostic.sensitivity is not None:
            rows.append(("sensitivity", report.diagnostic.sensitivity))
    for name, value in rows:
        lines.append(f"| {name[:name_width].ljust(name_width)} | {f'{value:.4f}'.ljust(value_width)} |")
        lines.append(sep)
    return "\n".join(lines)


def compress_tree(trace: CompressTrace) -> str:
    """
    Display compression accounting as a tree.

    Example output:
        video: 100 T-tokens + 256 S-tokens (budget 356)
        ├── GOP 0 idr=12 frames 0..24: 1600 tokens, 1344 static, 64 groups
        └── GOP 1 idr=37 frames 25..49: ...
    """
    lines = [f"video: {trace.t_tokens} T-tokens + {trace.s_tokens} S-tokens (budget {trace.budget})"]
    for i, gop in enumerate(trace.per_gop):
        connector = "└── " if i == len(trace.per_gop) - 1 else "├── "
        lines.append(
            f"{connector}GOP {i} idr={gop.idr} frames {gop.start}..{gop.end}: "
            f"{gop.tokens} tokens, {gop.removed} static, {gop.groups} groups"
        )
    return "\n".join(lines)
