# vexpert - Language-bias diagnostic
# Copyright (C) 2026 Free & Fair

"""
Does the model look at the video?

Grounding runs over an evaluation set three times: on the real features,
on frame-shuffled features and on blank features. A model that answers
from language patterns alone produces the same (start, end) pairs in every
case: its predictions pile up in one histogram bin and do not move when
the video is shuffled.
"""

from __future__ import annotations

import logging
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from ..errors import EvalError
from ..schema.features import FrameFeatureSet
from ..schema.intervals import iou_1d
from ..schema.types import Perturbation, Segment

logger = logging.getLogger(__name__)

N_BINS = 50
CHANGE_IOU = 0.5

Grounder = Callable[[FrameFeatureSet, str], Segment]


class PerturbationResult(BaseModel):
    perturbation: Perturbation
    histogram: list[list[float]] = Field(..., description="[bins x bins] mass over normalized (start, end)")
    mode_share: float = Field(..., description="Share of predictions in the most populated bin")
    predictions: list[tuple[float, float]] = Field(default_factory=list, description="Normalized (start, end)")


class DiagnosticReport(BaseModel):
    n_samples: int
    bins: int = N_BINS
    results: dict[str, PerturbationResult] = Field(default_factory=dict)
    sensitivity: Optional[float] = Field(default=None, description="Share of samples whose shuffled prediction moved")
    blank_change: Optional[float] = Field(default=None, description="Share of samples whose blank-video prediction moved")


def perturb(features: FrameFeatureSet, mode: Perturbation, rng: np.random.Generator) -> FrameFeatureSet:
    """Shuffle frame order, or replace the video by zeros with uniform attention."""
    if mode == Perturbation.NONE:
        return features
    if mode == Perturbation.SHUFFLE:
        order = rng.permutation(features.n)
        return FrameFeatureSet(cls=features.cls[order], patches=features.patches[order], attn=features.attn[order])
    return FrameFeatureSet(
        cls=np.zeros_like(features.cls),
        patches=np.zeros_like(features.patches),
        attn=np.full_like(features.attn, 1.0 / features.p),
    )


def normalized(seg: Segment, n: int) -> tuple[float, float]:
    scale = float(max(n - 1, 1))
    return seg.start / scale, seg.end / scale


def histogram(points: Sequence[tuple[float, float]], bins: int = N_BINS) -> np.ndarray:
    """2-D histogram of normalized (start, end) pairs; mass sums to 1."""
    hist = np.zeros((bins, bins), dtype=np.float64)
    for s, e in points:
        i = min(int(np.clip(s, 0.0, 1.0) * bins), bins - 1)
        j = min(int(np.clip(e, 0.0, 1.0) * bins), bins - 1)
        hist[i, j] += 1.0
    total = hist.sum()
    return hist / total if total > 0 else hist


def bias_diagnostic(
    grounder: Grounder,
    samples: Sequence[tuple[FrameFeatureSet, str]],
    perturbations: Sequence[Perturbation] = (Perturbation.NONE, Perturbation.SHUFFLE, Perturbation.BLANK),
    seed: int = 0,
    bins: int = N_BINS,
) -> DiagnosticReport:
    """
    Run the grounder on (features, prompt) samples under each perturbation.

    Sensitivity is the share of samples whose shuffled-video prediction has
    IoU < 0.5 with the unperturbed one.

    Example:
        report = bias_diagnostic(expert.as_grounder(), [(features, prompt), ...])
        report.results["none"].mode_share
    """
    if not samples:
        raise EvalError("bias diagnostic needs at least one sample")
    perturbations = list(dict.fromkeys([Perturbation.NONE, *perturbations]))
    report = DiagnosticReport(n_samples=len(samples), bins=bins)
    raw: dict[Perturbation, list[Segment]] = {}
    for mode in perturbations:
        rng = np.random.default_rng(seed)
        preds = [grounder(perturb(f, mode, rng), prompt) for f, prompt in samples]
        raw[mode] = preds
        points = [normalized(p, f.n) for p, (f, _) in zip(preds, samples)]
        hist = histogram(points, bins)
        report.results[mode.value] = PerturbationResult(
            perturbation=mode,
            histogram=hist.tolist(),
            mode_share=float(hist.max()),
            predictions=points,
        )
        logger.debug("diagnostic %s: mode share %.3f", mode.value, hist.max())

    def moved(mode: Perturbation) -> float:
        return float(np.mean([iou_1d(a, b) < CHANGE_IOU for a, b in zip(raw[Perturbation.NONE], raw[mode])]))

    if Perturbation.SHUFFLE in raw:
        report.sensitivity = moved(Perturbation.SHUFFLE)
    if Perturbation.BLANK in raw:
        report.blank_change = moved(Perturbation.BLANK)
    return report
