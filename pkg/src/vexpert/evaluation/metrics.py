# vexpert - Evaluation metrics
# Copyright (C) 2026 Free & Fair

"""
Grounding, highlight, dense-captioning localization and grounded-QA
metrics. Segments are in frame units throughout; every function takes
plain sequences so the results can be recomputed from per-sample records.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..errors import EvalError
from ..schema.intervals import iop_1d, iou_1d, pairwise_iou
from ..schema.types import Segment

RECALL_THRESHOLDS = (0.3, 0.5, 0.7)
MAP_THRESHOLDS = tuple(float(t) for t in np.round(np.linspace(0.5, 0.95, 10), 2))
VERY_GOOD = 4

__all__ = [
    "RECALL_THRESHOLDS",
    "MAP_THRESHOLDS",
    "VERY_GOOD",
    "iou_1d",
    "iop_1d",
    "best_iou",
    "best_iop",
    "recall_at_iou",
    "average_precision",
    "interpolated_prec_rec",
    "map_at_iou",
    "clip_labels",
    "hd_metrics",
    "gqa_metrics",
    "dvc_loc_metrics",
]


def _key(prefix: str, t: float) -> str:
    return f"{prefix}@{t:g}"


def best_iou(pred: Segment, gts: Sequence[Segment]) -> float:
    return max((iou_1d(pred, g) for g in gts), default=0.0)


def best_iop(pred: Segment, gts: Sequence[Segment]) -> float:
    return max((iop_1d(pred, g) for g in gts), default=0.0)


# =============================================================================
# Temporal grounding
# =============================================================================

def recall_at_iou(
    preds: Sequence[Segment],
    gts: Sequence[Sequence[Segment]],
    thresholds: Sequence[float] = RECALL_THRESHOLDS,
) -> dict[str, float]:
    """
    R1@t for every threshold plus mIoU, from top-1 predictions.

    gts[i] lists the ground truths of sample i; the best-matching one counts.

    Example:
        recall_at_iou([Segment(start=0, end=10)], [[Segment(start=5, end=15)]])
        # {"R1@0.3": 1.0, "R1@0.5": 0.0, "R1@0.7": 0.0, "mIoU": 0.333...}
    """
    if len(preds) != len(gts):
        raise EvalError(f"{len(preds)} predictions for {len(gts)} samples")
    if not preds:
        raise EvalError("no samples to evaluate")
    ious = np.array([best_iou(p, g) for p, g in zip(preds, gts)], dtype=np.float64)
    out = {_key("R1", t): float(np.mean(ious >= t)) for t in thresholds}
    out["mIoU"] = float(ious.mean())
    return out


def interpolated_prec_rec(prec: np.ndarray, rec: np.ndarray) -> float:
    """Interpolated AP over a precision/recall curve."""
    mprec = np.hstack([[0.0], prec, [0.0]])
    mrec = np.hstack([[0.0], rec, [1.0]])
    for i in range(len(mprec) - 2, -1, -1):
        mprec[i] = max(mprec[i], mprec[i + 1])
    idx = np.flatnonzero(mrec[1:] != mrec[:-1]) + 1
    return float(np.sum((mrec[idx] - mrec[idx - 1]) * mprec[idx]))


def average_precision(ranked: Sequence[Segment], gts: Sequence[Segment], threshold: float) -> float:
    """
    AP of one query. Predictions are taken by descending score (ties keep
    list order); each claims the highest-IoU unclaimed ground truth with
    IoU >= threshold.
    """
    if not gts:
        raise EvalError("average precision needs at least one ground truth")
    if not ranked:
        return 0.0
    scores = np.array([p.score for p in ranked], dtype=np.float64)
    order = np.lexsort((np.arange(len(ranked)), -scores))
    ious = pairwise_iou(
        np.array([[ranked[i].start, ranked[i].end] for i in order]),
        np.array([[g.start, g.end] for g in gts]),
    )
    claimed = np.zeros(len(gts), dtype=bool)
    tp = np.zeros(len(order))
    for r in range(len(order)):
        for j in np.argsort(-ious[r], kind="stable"):
            if ious[r, j] < threshold:
                break
            if not claimed[j]:
                claimed[j] = True
                tp[r] = 1.0
                break
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(1.0 - tp)
    return interpolated_prec_rec(tp_cum / (tp_cum + fp_cum), tp_cum / len(gts))


def map_at_iou(
    ranked_preds: Sequence[Sequence[Segment]],
    gts: Sequence[Sequence[Segment]],
    thresholds: Sequence[float] = MAP_THRESHOLDS,
) -> dict[str, float]:
    """mAP@t per threshold (mean over queries) and mAP@Avg over the sweep."""
    if len(ranked_preds) != len(gts):
        raise EvalError(f"{len(ranked_preds)} prediction lists for {len(gts)} queries")
    if not gts:
        raise EvalError("no queries to evaluate")
    per_t = {
        t: float(np.mean([average_precision(p, g, t) for p, g in zip(ranked_preds, gts)]))
        for t in thresholds
    }
    out = {_key("mAP", t): v for t, v in per_t.items()}
    out["mAP@Avg"] = float(np.mean(list(per_t.values())))
    return out


# =============================================================================
# Highlight detection
# =============================================================================

def clip_labels(
    n_clips: int,
    clip_ids: Sequence[int] = (),
    saliency: Sequence[Sequence[int]] = (),
    gt_clips: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """
    Dense [clips x annotators] saliency labels.

    With saliency rows the listed clips take their scores and every other
    clip scores 0. Without them, ``gt_clips`` (clips overlapping a ground
    truth) are labelled VERY_GOOD by a single annotator.
    """
    if saliency:
        annotators = len(saliency[0])
        labels = np.zeros((n_clips, annotators), dtype=np.int64)
        for cid, scores in zip(clip_ids, saliency):
            if 0 <= cid < n_clips:
                labels[cid] = scores
        return labels
    labels = np.zeros((n_clips, 1), dtype=np.int64)
    for cid in gt_clips or ():
        if 0 <= cid < n_clips:
            labels[cid] = VERY_GOOD
    return labels


def hd_query(scores: np.ndarray, labels: np.ndarray, very_good: int = VERY_GOOD) -> tuple[float, Optional[float]]:
    """
    HIT@1 and AP of one query's clip ranking. AP is None when no clip is
    rated Very Good by any annotator.
    """
    scores = np.asarray(scores, dtype=np.float64)
    lab = np.asarray(labels)
    lab = lab[:, None] if lab.ndim == 1 else lab
    if lab.shape[0] != scores.shape[0]:
        raise EvalError(f"{scores.shape[0]} clip scores for {lab.shape[0]} labelled clips")
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    relevant = lab >= very_good
    hit = float(relevant[order[0]].mean())
    per_annotator = []
    for a in range(relevant.shape[1]):
        rel = relevant[order, a].astype(np.float64)
        if rel.sum() == 0:
            continue
        tp = np.cumsum(rel)
        per_annotator.append(interpolated_prec_rec(tp / np.arange(1, rel.size + 1), tp / rel.sum()))
    return hit, float(np.mean(per_annotator)) if per_annotator else None


def hd_metrics(
    clip_scores: Sequence[np.ndarray],
    labels: Sequence[np.ndarray],
    very_good: int = VERY_GOOD,
) -> dict[str, float]:
    """
    HIT@1 and mAP of clip rankings against "Very Good" labels.

    Labels may be [clips] or [clips x annotators]; annotators are averaged.
    Queries without any Very Good clip are left out of mAP.
    """
    if len(clip_scores) != len(labels):
        raise EvalError(f"{len(clip_scores)} score vectors for {len(labels)} label sets")
    if not labels:
        raise EvalError("no queries to evaluate")
    per_query = [hd_query(s, lab, very_good) for s, lab in zip(clip_scores, labels)]
    hits = [hit for hit, _ in per_query]
    aps = [ap for _, ap in per_query if ap is not None]
    return {"HIT@1": float(np.mean(hits)), "HD-mAP": float(np.mean(aps)) if aps else 0.0}


# =============================================================================
# Grounded QA
# =============================================================================

def gqa_metrics(
    pred_answers: Sequence[str],
    answers: Sequence[str],
    preds: Sequence[Segment],
    gts: Sequence[Sequence[Segment]],
    thresholds: Sequence[float] = (0.3, 0.5),
    grounded_iop: float = 0.5,
) -> dict[str, float]:
    """
    Acc@QA, IoP@t, mIoP, IoU@t, mIoU and Acc@GQA (correct and IoP >= 0.5).
    Answers compare case-insensitively after stripping.
    """
    n = len(pred_answers)
    if not (n == len(answers) == len(preds) == len(gts)):
        raise EvalError("gqa inputs differ in length")
    if n == 0:
        raise EvalError("no samples to evaluate")
    correct = np.array([p.strip().lower() == a.strip().lower() for p, a in zip(pred_answers, answers)])
    iops = np.array([best_iop(p, g) for p, g in zip(preds, gts)], dtype=np.float64)
    ious = np.array([best_iou(p, g) for p, g in zip(preds, gts)], dtype=np.float64)
    out = {"Acc@QA": float(correct.mean())}
    out.update({_key("IoP", t): float(np.mean(iops >= t)) for t in thresholds})
    out["mIoP"] = float(iops.mean())
    out.update({_key("IoU", t): float(np.mean(ious >= t)) for t in thresholds})
    out["mIoU"] = float(ious.mean())
    out["Acc@GQA"] = float(np.mean(correct & (iops >= grounded_iop)))
    return out


# =============================================================================
# Dense captioning localization
# =============================================================================

def matched_pair_ious(pred: Sequence[Segment], gt: Sequence[Segment]) -> list[float]:
    """IoU of the i-th <LOC> with the i-th ground truth, over the shorter list."""
    return [iou_1d(pred[i], gt[i]) for i in range(min(len(pred), len(gt)))]


def dvc_loc_metrics(
    preds: Sequence[Sequence[Segment]],
    gts: Sequence[Sequence[Segment]],
    thresholds: Sequence[float] = RECALL_THRESHOLDS,
) -> dict[str, float]:
    """
    <LOC> count fidelity plus IoU of order-matched (<LOC>, ground truth) pairs.

    Recall@t counts matched pairs with IoU >= t over all ground truths.
    """
    if len(preds) != len(gts):
        raise EvalError(f"{len(preds)} prediction lists for {len(gts)} samples")
    if not gts:
        raise EvalError("no samples to evaluate")
    fidelity = np.mean([len(p) == len(g) for p, g in zip(preds, gts)])
    pair_ious = [iou for p, g in zip(preds, gts) for iou in matched_pair_ious(p, g)]
    total_gt = sum(len(g) for g in gts)
    ious = np.array(pair_ious, dtype=np.float64)
    out = {"count_fidelity": float(fidelity), "pair_mIoU": float(ious.mean()) if ious.size else 0.0}
    out.update({
        _key("Recall", t): float((ious >= t).sum() / total_gt) if total_gt else 0.0 for t in thresholds
    })
    return out
