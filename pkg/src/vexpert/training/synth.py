# vexpert - Synthetic dataset
# Copyright (C) 2026 Free & Fair

"""
Synthetic instruction data with known event placement.

Every example stores the SyntheticVideoSpec rather than the feature arrays;
features are re-encoded on demand by the frontend, which is a pure function
of the spec. Class 0 is the background; event classes start at 1 and map
to fixed action phrases.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from ..errors import DataError
from ..schema.features import FrameFeatureSet
from ..schema.types import (
    EventPlacement,
    Segment,
    SynthRanges,
    SyntheticVideoSpec,
    Task,
    TrainExample,
)
from ..video.frontend import encode_synthetic, fixed_projection, load_features, resample_uniform
from .templates import render_template

logger = logging.getLogger(__name__)

CLASS_PHRASES = [
    "person opens a door",
    "person sits on a chair",
    "person drinks from a cup",
    "person holds a phone",
    "person closes a window",
    "person reads a book",
    "person turns on the light",
    "person puts on shoes",
    "person eats a sandwich",
    "person washes dishes",
    "person takes a towel",
    "person laughs at a picture",
    "person throws a pillow",
    "person sneezes",
    "person fixes a vacuum",
    "person walks through a doorway",
]

VQA_QUESTIONS = [
    "What does the person do first?",
    "Which action happens first in the video?",
]


def class_phrase(class_id: int) -> str:
    if class_id < 1:
        raise DataError("class 0 is the background and has no phrase")
    return CLASS_PHRASES[(class_id - 1) % len(CLASS_PHRASES)]


def split_of(example_id: str) -> str:
    """Stable split by the first sha1 byte of the id: 0 test, 1 val, else train."""
    bucket = hashlib.sha1(example_id.encode("utf-8")).digest()[0] % 10
    return "test" if bucket == 0 else "val" if bucket == 1 else "train"


# =============================================================================
# Generation
# =============================================================================

def _place_events(rng: np.random.Generator, ranges: SynthRanges, k: int) -> list[tuple[int, int]]:
    """k disjoint frame runs in time order."""
    n = ranges.n_frames
    longest = max(ranges.min_event_frames, min(ranges.max_event_frames, n // k))
    lengths = rng.integers(ranges.min_event_frames, longest + 1, size=k)
    free = n - int(lengths.sum())
    gaps = rng.multinomial(free, np.full(k + 1, 1.0 / (k + 1)))
    runs, cursor = [], 0
    for j in range(k):
        cursor += int(gaps[j])
        runs.append((cursor, cursor + int(lengths[j]) - 1))
        cursor += int(lengths[j])
    return runs


def synth_example(index: int, seed: int, ranges: SynthRanges, rng: np.random.Generator) -> TrainExample:
    tasks = list(ranges.task_mix)
    weights = np.array([ranges.task_mix[t] for t in tasks], dtype=np.float64)
    task = tasks[int(rng.choice(len(tasks), p=weights / weights.sum()))]

    k = int(rng.integers(ranges.min_events, ranges.max_events + 1))
    classes = rng.choice(np.arange(1, ranges.n_classes + 1), size=k, replace=False)
    runs = _place_events(rng, ranges, k)
    events = [
        EventPlacement(segment=Segment(start=s, end=e), class_id=int(c))
        for (s, e), c in zip(runs, classes)
    ]
    video = SyntheticVideoSpec(
        n_frames=ranges.n_frames,
        grid=ranges.grid,
        events=events,
        noise_sigma=ranges.noise_sigma,
        seed=int(rng.integers(2**31 - 1)),
        feat_dim=ranges.feat_dim,
    )

    example_id = f"synth-{seed}-{index:06d}"
    common = dict(id=example_id, task=task, video=video, split=split_of(example_id),
                  duration=float(ranges.n_frames - 1))
    if task == Task.TG:
        j = int(rng.integers(k))
        query = class_phrase(events[j].class_id)
        prompt, target = render_template(task, {"query": query}, rng)
        return TrainExample(prompt=prompt, target=target, query=query,
                            gt_segments=[events[j].segment], event_classes=[events[j].class_id], **common)

    if task == Task.DVC:
        captions = [class_phrase(ev.class_id) for ev in events]
        prompt, target = render_template(task, {"captions": captions}, rng)
        return TrainExample(prompt=prompt, target=target, query=" ".join(captions),
                            gt_segments=[ev.segment for ev in events],
                            event_classes=[ev.class_id for ev in events], **common)

    first = events[0]
    answer = class_phrase(first.class_id)
    others = [c for c in range(1, ranges.n_classes + 1) if c != first.class_id]
    n_distractors = min(3, len(others))
    distractors = [class_phrase(int(c)) for c in rng.choice(others, size=n_distractors, replace=False)]
    choices = [answer] + distractors
    choices = [choices[i] for i in rng.permutation(len(choices))]
    question = VQA_QUESTIONS[int(rng.integers(len(VQA_QUESTIONS)))]
    prompt, target = render_template(task, {"question": question, "choices": choices, "answer": answer}, rng)
    return TrainExample(prompt=prompt, target=target, query=question, answer=answer, choices=choices,
                        evidence=[first.segment], event_classes=[first.class_id], **common)


def synth_dataset(size: int, ranges: Optional[SynthRanges] = None, seed: int = 0) -> list[TrainExample]:
    """
    Generate ``size`` examples. Deterministic in (size, ranges, seed).

    Example:
        examples = synth_dataset(10, SynthRanges(), seed=1)
        examples[0].target  # "During <LOC>." for a TG sample
    """
    if size < 0:
        raise DataError(f"dataset size must be >= 0, got {size}")
    ranges = ranges or SynthRanges()
    rng = np.random.default_rng(seed)
    examples = [synth_example(i, seed, ranges, rng) for i in range(size)]
    logger.debug("generated %d synthetic examples (seed=%d)", size, seed)
    return examples


# =============================================================================
# Oracle
# =============================================================================

def class_correlation(features: FrameFeatureSet, class_id: int) -> np.ndarray:
    """Per-frame correlation of the class token with R e_c."""
    direction = fixed_projection(features.feat_dim)[:, class_id]
    return features.cls.astype(np.float64) @ direction


def oracle_locate(features: FrameFeatureSet, class_id: int) -> Segment:
    """
    Locate an event from features alone: threshold the class correlation at
    half its maximum and return the longest run above it.
    """
    score = class_correlation(features, class_id)
    peak = float(score.max())
    if peak <= 0:
        return Segment(start=0.0, end=float(features.n - 1), score=0.0)
    above = score >= 0.5 * peak
    best, best_len, start = (0, 0), 0, None
    for t, flag in enumerate(list(above) + [False]):
        if flag and start is None:
            start = t
        elif not flag and start is not None:
            if t - start > best_len:
                best, best_len = (start, t - 1), t - start
            start = None
    return Segment(start=float(best[0]), end=float(best[1]), score=peak)


def oracle_grounder() -> Callable[[FrameFeatureSet, str], Segment]:
    """A grounder that reads the class phrase from the prompt and locates it with oracle_locate."""

    def grounder(features: FrameFeatureSet, prompt: str) -> Segment:
        for i, phrase in enumerate(CLASS_PHRASES):
            if phrase in prompt and i + 1 < features.feat_dim:
                return oracle_locate(features, i + 1)
        return Segment(start=0.0, end=float(features.n - 1), score=0.0)

    return grounder


def oracle_classes(features: FrameFeatureSet, n_classes: int, threshold: float = 0.5) -> np.ndarray:
    """
    Argmax-correlation event class per frame over classes 1..n_classes, or 0
    (background) where no class correlates above threshold.
    """
    projection = fixed_projection(features.feat_dim)[:, 1 : n_classes + 1]
    scores = features.cls.astype(np.float64) @ projection
    best = scores.argmax(axis=1)
    return np.where(scores.max(axis=1) > threshold, best + 1, 0)


# =============================================================================
# Persistence
# =============================================================================

def save_dataset(examples: Iterable[TrainExample], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.model_dump(mode="json", exclude_none=True), sort_keys=True))
            fh.write("\n")
    return path


def load_dataset(path: Path | str) -> list[TrainExample]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset not found: {path}")
    examples = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            examples.append(TrainExample.model_validate(json.loads(line)))
        except (json.JSONDecodeError, ValidationError) as exc:
            raise DataError(f"{path}:{lineno}: invalid example ({exc})") from exc
    return examples


def load_example_features(
    example: TrainExample, n_frames: Optional[int] = None, base_dir: Optional[Path | str] = None
) -> FrameFeatureSet:
    """Features for an example, resampled to n_frames when given."""
    if example.features is not None:
        features = example.features
    elif example.video is not None:
        features = encode_synthetic(example.video)
    elif example.features_path is not None:
        fpath = Path(example.features_path)
        if not fpath.is_absolute() and base_dir is not None:
            fpath = Path(base_dir) / fpath
        features = load_features(fpath)
    else:
        raise DataError(f"{example.id}: no feature source")
    if n_frames is not None and features.n != n_frames:
        features = resample_uniform(features, n_frames)
    return features


def dataset_split(examples: Sequence[TrainExample], split: str) -> list[TrainExample]:
    return [ex for ex in examples if ex.split == split]
