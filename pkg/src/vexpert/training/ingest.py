# vexpert - Annotation ingestion
# Copyright (C) 2026 Free & Fair

"""
Readers for public annotation files.

    charades_sta   text lines "<vid> <start> <end>##<query>"
    qvhighlights   JSON lines with relevant_windows, relevant_clip_ids, saliency_scores
    nextgqa        JSON lines with question, choices, answer and grounding windows

Segments stay in seconds in AnnotationRecord; features are supplied
separately (one container per video id) and joined by records_to_examples.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
from pydantic import ValidationError

from ..errors import AnnotationError, DataError
from ..schema.types import AnnotationFormat, AnnotationRecord, LOC_TOKEN, Task, TrainExample
from .synth import split_of
from .templates import render_template

logger = logging.getLogger(__name__)

FEATURE_SUFFIX = ".feat"


# =============================================================================
# Field helpers
# =============================================================================

def _field(record: dict[str, Any], line: int, *names: str) -> Any:
    for name in names:
        if name in record:
            return record[name]
    raise AnnotationError("missing field", line=line, field=names[0])


def _seconds(value: Any, line: int, field: str) -> float:
    try:
        seconds = float(value)
    except (TypeError, ValueError):
        raise AnnotationError(f"not a number: {value!r}", line=line, field=field) from None
    if seconds < 0:
        raise AnnotationError(f"negative time {seconds}", line=line, field=field)
    return seconds


def _ints(raw: Any, line: int, field: str) -> list[int]:
    if not isinstance(raw, list):
        raise AnnotationError("expected a list of integers", line=line, field=field)
    try:
        return [int(v) for v in raw]
    except (TypeError, ValueError):
        raise AnnotationError(f"not an integer list: {raw!r}", line=line, field=field) from None


def _windows(raw: Any, line: int, field: str) -> list[tuple[float, float]]:
    if not isinstance(raw, list):
        raise AnnotationError("expected a list of [start, end] pairs", line=line, field=field)
    windows = []
    for pair in raw:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise AnnotationError(f"bad window {pair!r}", line=line, field=field)
        s, e = _seconds(pair[0], line, field), _seconds(pair[1], line, field)
        if e < s:
            raise AnnotationError(f"window end {e} before start {s}", line=line, field=field)
        windows.append((s, e))
    return windows


def _json_lines(path: Path) -> list[tuple[int, dict[str, Any]]]:
    rows = []
    for lineno, text in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not text.strip():
            continue
        try:
            row = json.loads(text)
        except json.JSONDecodeError as exc:
            raise AnnotationError(f"invalid JSON ({exc.msg})", line=lineno) from None
        if not isinstance(row, dict):
            raise AnnotationError("expected a JSON object", line=lineno)
        rows.append((lineno, row))
    return rows


# =============================================================================
# Readers
# =============================================================================

def parse_charades_sta(path: Path, durations: Optional[dict[str, float]] = None) -> list[AnnotationRecord]:
    """
    Example line:
        AO8RW 0.0 6.9##a person opens a door
    """
    records = []
    for lineno, text in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not text.strip():
            continue
        if "##" not in text:
            raise AnnotationError("expected '<vid> <start> <end>##<query>'", line=lineno, field="query")
        info, query = text.split("##", 1)
        parts = info.split()
        if len(parts) != 3:
            raise AnnotationError(f"expected 3 fields before '##', got {len(parts)}", line=lineno, field="info")
        vid, s, e = parts
        start, end = _seconds(s, lineno, "start"), _seconds(e, lineno, "end")
        if end < start:
            raise AnnotationError(f"end {end} before start {start}", line=lineno, field="end")
        if not query.strip():
            raise AnnotationError("empty query", line=lineno, field="query")
        records.append(AnnotationRecord(
            source=AnnotationFormat.CHARADES_STA,
            video_id=vid,
            qid=f"{vid}_{lineno}",
            query=query.strip(),
            windows=[(start, end)],
            duration=(durations or {}).get(vid),
            line=lineno,
        ))
    return records


def parse_qvhighlights(path: Path, durations: Optional[dict[str, float]] = None) -> list[AnnotationRecord]:
    records = []
    for lineno, row in _json_lines(path):
        vid = str(_field(row, lineno, "vid"))
        clip_ids = _ints(row.get("relevant_clip_ids", []), lineno, "relevant_clip_ids")
        raw_saliency = row.get("saliency_scores", [])
        if not isinstance(raw_saliency, list):
            raise AnnotationError("expected a list of score rows", line=lineno, field="saliency_scores")
        saliency = [_ints(scores, lineno, "saliency_scores") for scores in raw_saliency]
        if saliency and len(saliency) != len(clip_ids):
            raise AnnotationError(
                f"{len(saliency)} saliency rows for {len(clip_ids)} clips", line=lineno, field="saliency_scores"
            )
        duration = row.get("duration", (durations or {}).get(vid))
        records.append(AnnotationRecord(
            source=AnnotationFormat.QVHIGHLIGHTS,
            video_id=vid,
            qid=str(_field(row, lineno, "qid")),
            query=str(_field(row, lineno, "query")),
            windows=_windows(_field(row, lineno, "relevant_windows"), lineno, "relevant_windows"),
            duration=None if duration is None else _seconds(duration, lineno, "duration"),
            clip_ids=clip_ids,
            saliency=saliency,
            line=lineno,
        ))
    return records


def parse_nextgqa(path: Path, durations: Optional[dict[str, float]] = None) -> list[AnnotationRecord]:
    records = []
    for lineno, row in _json_lines(path):
        vid = str(_field(row, lineno, "video_id", "video"))
        choices = [str(c) for c in _field(row, lineno, "choices")]
        answer = str(_field(row, lineno, "answer"))
        if choices and answer not in choices:
            raise AnnotationError(f"answer {answer!r} not among choices", line=lineno, field="answer")
        duration = row.get("duration", (durations or {}).get(vid))
        records.append(AnnotationRecord(
            source=AnnotationFormat.NEXTGQA,
            video_id=vid,
            qid=str(row.get("qid", f"{vid}_{lineno}")),
            query=str(_field(row, lineno, "question")),
            windows=_windows(_field(row, lineno, "windows", "location"), lineno, "windows"),
            duration=None if duration is None else _seconds(duration, lineno, "duration"),
            answer=answer,
            choices=choices,
            line=lineno,
        ))
    return records


_READERS: dict[AnnotationFormat, Callable[..., list[AnnotationRecord]]] = {
    AnnotationFormat.CHARADES_STA: parse_charades_sta,
    AnnotationFormat.QVHIGHLIGHTS: parse_qvhighlights,
    AnnotationFormat.NEXTGQA: parse_nextgqa,
}


def ingest_annotations(
    fmt: AnnotationFormat | str, path: Path | str, durations: Optional[dict[str, float]] = None
) -> list[AnnotationRecord]:
    """
    Parse an annotation file into normalized records (segments in seconds).

    Example:
        ingest_annotations("charades_sta", "charades_sta_test.txt", durations)
    """
    try:
        fmt = AnnotationFormat(fmt)
    except ValueError:
        raise DataError(f"unknown annotation format {fmt!r}") from None
    path = Path(path)
    if not path.exists():
        raise DataError(f"annotation file not found: {path}")
    try:
        records = _READERS[fmt](path, durations)
    except ValidationError as exc:
        raise DataError(f"{path}: {exc}") from exc
    logger.info("read %d %s records from %s", len(records), fmt.value, path)
    return records


# =============================================================================
# Records -> examples
# =============================================================================

def records_to_examples(
    records: list[AnnotationRecord],
    n_frames: int,
    features_dir: Optional[Path | str] = None,
    seed: int = 0,
) -> list[TrainExample]:
    """
    Turn records into training/evaluation examples.

    Grounding records become TG examples with one <LOC> per window; QA
    records become VQA examples whose windows are the grounding evidence.
    Seconds convert to frames with round(seconds / duration * (n - 1)).
    """
    rng = np.random.default_rng(seed)
    examples = []
    for rec in records:
        if rec.duration is None or rec.duration <= 0:
            raise AnnotationError("duration required to convert seconds to frames", line=rec.line, field="duration")
        segments = rec.segments(n_frames)
        example_id = rec.qid or f"{rec.video_id}_{rec.line}"
        fpath = f"{rec.video_id}{FEATURE_SUFFIX}"
        if features_dir is not None:
            fpath = str(Path(features_dir) / fpath)
        common = dict(id=example_id, features_path=fpath, duration=rec.duration, split=split_of(example_id))

        if rec.source == AnnotationFormat.NEXTGQA:
            prompt, target = render_template(
                Task.VQA, {"question": rec.query, "choices": rec.choices, "answer": rec.answer}, rng
            )
            examples.append(TrainExample(task=Task.VQA, prompt=prompt, target=target, query=rec.query,
                                         answer=rec.answer, choices=rec.choices, evidence=segments, **common))
            continue

        prompt, _ = render_template(Task.TG, {"query": rec.query}, rng)
        target = " ".join([f"During {LOC_TOKEN}."] * len(segments))
        examples.append(TrainExample(task=Task.TG, prompt=prompt, target=target, query=rec.query,
                                     gt_segments=segments, clip_ids=rec.clip_ids, saliency=rec.saliency,
                                     **common))
    return examples
