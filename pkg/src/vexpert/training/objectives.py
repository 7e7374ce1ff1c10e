# vexpert - Training objectives
# Copyright (C) 2026 Free & Fair

"""
Losses for boundary-aware training.

    total = lambda_text * text + ce + lambda_L1 * l1 + lambda_iou * giou

text is next-token cross-entropy over response tokens, ce the indicator
BCE over all frames, l1 and giou the boundary regression terms averaged
over foreground frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import torch
import torch.nn.functional as F

from ..errors import ObjectiveError
from ..schema.intervals import POINT_EPS, giou_1d
from ..schema.types import LossWeights, Segment

PROB_CLAMP = 1e-7
_EPS = 1e-12

__all__ = [
    "LossBundle",
    "MatchResult",
    "text_loss",
    "fg_labels",
    "indicator_loss",
    "giou_1d",
    "giou_1d_tensor",
    "smooth_l1",
    "boundary_loss",
    "match_locs",
    "total_loss",
]


@dataclass
class LossBundle:
    text: torch.Tensor
    ce: torch.Tensor
    l1: torch.Tensor
    giou: torch.Tensor
    total: torch.Tensor
    weights: LossWeights = field(default_factory=LossWeights)

    def as_floats(self) -> dict[str, float]:
        return {name: float(getattr(self, name).detach()) for name in ("text", "ce", "l1", "giou", "total")}

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.as_floats().values())


@dataclass
class MatchResult:
    pairs: list[tuple[int, int]]  # (loc index, gt index)
    unmatched_locs: list[int]
    unmatched_gts: list[int]


def text_loss(logits: torch.Tensor, targets: torch.Tensor, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    Mean negative log-likelihood of targets over unmasked positions.

    logits [..., V] and targets [...] are already aligned (position j holds
    the id of token j + 1). Without a mask, positions with a negative target
    id are ignored.
    """
    if mask is None:
        mask = targets >= 0
    mask = mask.bool()
    if not mask.any():
        raise ObjectiveError("text loss over an empty mask")
    flat_logits = logits.reshape(-1, logits.shape[-1])
    flat_targets = targets.reshape(-1).clamp(min=0)
    nll = F.cross_entropy(flat_logits, flat_targets, reduction="none")
    m = mask.reshape(-1).to(nll.dtype)
    return (nll * m).sum() / m.sum()


def fg_labels(gt: Segment, n: int) -> torch.Tensor:
    """1.0 on frames floor(start)..ceil(end), clipped to [0, n-1]."""
    lo = max(0, math.floor(gt.start))
    hi = min(n - 1, math.ceil(gt.end))
    labels = torch.zeros(n)
    if lo <= hi:
        labels[lo : hi + 1] = 1.0
    return labels


def indicator_loss(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy over frames; probs clamped to [1e-7, 1 - 1e-7]."""
    p = probs.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = labels.to(p.dtype)
    return -(y * torch.log(p) + (1.0 - y) * torch.log1p(-p)).mean()


def giou_1d_tensor(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Row-wise 1-D gIoU between [N x 2] predictions and a [2] (or [N x 2]) target."""
    gt = gt.expand_as(pred)
    ps, pe, gs, ge = pred[..., 0], pred[..., 1], gt[..., 0], gt[..., 1]
    inter = (torch.minimum(pe, ge) - torch.maximum(ps, gs)).clamp(min=0.0)
    union = (pe - ps) + (ge - gs) - inter
    hull = torch.maximum(pe, ge) - torch.minimum(ps, gs)
    safe_union = torch.where(union > _EPS, union, torch.ones_like(union))
    safe_hull = torch.where(hull > _EPS, hull, torch.ones_like(hull))
    iou = torch.where(union > _EPS, inter / safe_union, torch.zeros_like(inter))
    value = torch.where(union > _EPS, iou - (hull - union) / safe_hull, -hull / (hull + POINT_EPS))
    # A degenerate hull means both intervals are the same point.
    return torch.where(hull > _EPS, value, torch.ones_like(value))


def smooth_l1(diff: torch.Tensor, beta: float = 1.0) -> torch.Tensor:
    a = diff.abs()
    return torch.where(a < beta, 0.5 * a * a / beta, a - 0.5 * beta)


def boundary_loss(offsets: torch.Tensor, labels: torch.Tensor, gt: Segment) -> tuple[torch.Tensor, torch.Tensor]:
    """
    (l1, giou) over foreground frames.

    True offsets at frame i are (i - start, end - i); the predicted segment
    is [i - left_i, i + right_i].
    """
    fg = labels > 0.5
    if not fg.any():
        raise ObjectiveError(f"ground truth {gt!r} has no foreground frames")
    idx = torch.arange(offsets.shape[0], dtype=offsets.dtype)[fg]
    pred = offsets[fg]
    true = torch.stack([idx - gt.start, gt.end - idx], dim=1)
    l1 = smooth_l1(pred - true).mean()

    segments = torch.stack([idx - pred[:, 0], idx + pred[:, 1]], dim=1)
    target = torch.tensor([gt.start, gt.end], dtype=offsets.dtype)
    giou = (1.0 - giou_1d_tensor(segments, target)).mean()
    return l1, giou


def match_locs(locs: Sequence[Any], gts: Sequence[Any]) -> MatchResult:
    """The i-th emitted <LOC> pairs with the i-th ground-truth segment."""
    k = min(len(locs), len(gts))
    return MatchResult(
        pairs=[(i, i) for i in range(k)],
        unmatched_locs=list(range(k, len(locs))),
        unmatched_gts=list(range(k, len(gts))),
    )


def total_loss(
    text: torch.Tensor | float,
    ce: torch.Tensor | float,
    l1: torch.Tensor | float,
    giou: torch.Tensor | float,
    weights: LossWeights,
) -> LossBundle:
    parts = [torch.as_tensor(x, dtype=torch.float64) if not isinstance(x, torch.Tensor) else x
             for x in (text, ce, l1, giou)]
    text_t, ce_t, l1_t, giou_t = parts
    total = weights.text * text_t + ce_t + (weights.l1 * l1_t + weights.iou * giou_t)
    return LossBundle(text=text_t, ce=ce_t, l1=l1_t, giou=giou_t, total=total, weights=weights)
