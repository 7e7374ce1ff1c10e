# vexpert - Interval arithmetic
# Copyright (C) 2026 Free & Fair

"""
1-D interval overlap measures on (start, end) pairs.

Intervals are continuous: [0, 10] has length 10. A zero-length interval
has IoU 1 with an identical interval and 0 with anything else; its IoP is
1 when it lies inside the ground truth.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from .types import Segment

Interval = Union[Segment, Sequence[float], np.ndarray]

# Two distinct points have no union; their gIoU is -hull / (hull + POINT_EPS), just above -1.
POINT_EPS = 1e-9


def as_pair(x: Interval) -> tuple[float, float]:
    if isinstance(x, Segment):
        return float(x.start), float(x.end)
    return float(x[0]), float(x[1])


def intersection(a: Interval, b: Interval) -> float:
    (s1, e1), (s2, e2) = as_pair(a), as_pair(b)
    return max(0.0, min(e1, e2) - max(s1, s2))


def iou_1d(a: Interval, b: Interval) -> float:
    """
    Example:
        iou_1d((0, 10), (5, 15))  # 1/3
    """
    (s1, e1), (s2, e2) = as_pair(a), as_pair(b)
    union = max(e1, e2) - min(s1, s2)
    if union <= 0.0:
        return 1.0 if (s1, e1) == (s2, e2) else 0.0
    return intersection(a, b) / union


def iop_1d(pred: Interval, gt: Interval) -> float:
    """Intersection over the prediction's own length."""
    (ps, pe), (gs, ge) = as_pair(pred), as_pair(gt)
    length = pe - ps
    if length <= 0.0:
        return 1.0 if gs <= ps <= ge else 0.0
    return intersection(pred, gt) / length


def giou_1d(a: Interval, b: Interval) -> float:
    """IoU - (|hull| - |union|) / |hull|, in (-1, 1]."""
    (s1, e1), (s2, e2) = as_pair(a), as_pair(b)
    hull = max(e1, e2) - min(s1, s2)
    if hull <= 0.0:
        return 1.0 if (s1, e1) == (s2, e2) else 0.0
    inter = intersection(a, b)
    union = (e1 - s1) + (e2 - s2) - inter
    if union <= 0.0:
        return -hull / (hull + POINT_EPS)
    return inter / union - (hull - union) / hull


def pairwise_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU matrix between [N x 2] and [M x 2] interval arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    inter = np.clip(
        np.minimum(a[:, None, 1], b[None, :, 1]) - np.maximum(a[:, None, 0], b[None, :, 0]), 0.0, None
    )
    union = np.maximum(a[:, None, 1], b[None, :, 1]) - np.minimum(a[:, None, 0], b[None, :, 0])
    same = (a[:, None, 0] == b[None, :, 0]) & (a[:, None, 1] == b[None, :, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), same.astype(np.float64))
    return out
