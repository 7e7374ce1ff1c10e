# vexpert - Evaluation runs
# Copyright (C) 2026 Free & Fair

"""
Run a VideoExpert over an evaluation set and collect an EvalReport.

    tg       R1@{0.3,0.5,0.7}, mIoU, mAP over ranked segments of the first <LOC>
    hd       HIT@1 and mAP of 2-second clip saliency
    dvc_loc  <LOC> count fidelity and order-matched pair IoU
    gqa      answer accuracy, then the predicted answer is grounded and scored by IoP/IoU
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..errors import EvalError
from ..model.expert import VideoExpert
from ..model.head import CLIP_SECONDS, pool_clip_saliency
from ..schema.features import FrameFeatureSet
from ..schema.types import EvalTask, Perturbation, Segment, Task, TrainExample
from ..training.synth import load_example_features
from ..training.templates import TG_PROMPTS
from .diagnostic import perturb
from .metrics import (
    best_iop,
    best_iou,
    clip_labels,
    dvc_loc_metrics,
    gqa_metrics,
    hd_metrics,
    hd_query,
    map_at_iou,
    matched_pair_ious,
    recall_at_iou,
)
from .report import EvalReport, SampleRecord

logger = logging.getLogger(__name__)

MAP_TOP_K = 10


def eligible(examples: Sequence[TrainExample], task: EvalTask) -> list[TrainExample]:
    if task in (EvalTask.TG, EvalTask.HD):
        return [ex for ex in examples if ex.task == Task.TG and ex.gt_segments]
    if task == EvalTask.DVC_LOC:
        return [ex for ex in examples if ex.task == Task.DVC and ex.gt_segments]
    return [ex for ex in examples if ex.task == Task.VQA and ex.evidence and ex.answer is not None]


def whole_video(n: int) -> Segment:
    return Segment(start=0.0, end=float(n - 1), score=0.0)


def gt_clips(segments: Sequence[Segment], duration: float, n: int) -> list[int]:
    """Clips whose 2-second window overlaps a ground-truth segment."""
    n_clips = max(1, math.ceil(duration / CLIP_SECONDS))
    clips: set[int] = set()
    for seg in segments:
        s, e = seg.to_seconds(duration, n)
        first = min(int(s // CLIP_SECONDS), n_clips - 1)
        last = min(int(e // CLIP_SECONDS), n_clips - 1)
        clips.update(range(first, last + 1))
    return sorted(clips)


class Evaluator:
    """
    Example:
        report = Evaluator(expert).run(examples, EvalTask.TG)
        report.metrics["R1@0.5"]
    """

    def __init__(self, expert: VideoExpert, base_dir: Optional[Path | str] = None, seed: int = 0):
        self.expert = expert
        self.base_dir = base_dir
        self.seed = seed

    def features(self, example: TrainExample, perturbation: Perturbation, rng: np.random.Generator) -> FrameFeatureSet:
        features = load_example_features(example, self.expert.config.n_frames, self.base_dir)
        self.expert.check_compatible(features)
        return perturb(features, perturbation, rng)

    def run(
        self,
        examples: Sequence[TrainExample],
        task: EvalTask,
        perturbation: Perturbation = Perturbation.NONE,
        checkpoint: Optional[str] = None,
    ) -> EvalReport:
        task = EvalTask(task)
        chosen = eligible(examples, task)
        if not chosen:
            raise EvalError(f"no examples suitable for task {task.value}")
        self.expert.eval()
        rng = np.random.default_rng(self.seed)
        handler = {
            EvalTask.TG: self._tg,
            EvalTask.HD: self._hd,
            EvalTask.DVC_LOC: self._dvc_loc,
            EvalTask.GQA: self._gqa,
        }[task]
        metrics, samples = handler(chosen, perturbation, rng)
        logger.info("%s on %d samples: %s", task.value, len(samples), metrics)
        return EvalReport(
            task=task,
            perturbation=perturbation,
            checkpoint=checkpoint,
            n_samples=len(samples),
            metrics=metrics,
            samples=samples,
        )

    # -------------------------------------------------------------------------
    # Tasks
    # -------------------------------------------------------------------------

    def _ranked(self, features: FrameFeatureSet, prompt: str, top_k: int) -> list[Segment]:
        pred = self.expert.ground(self.expert.visual_tokens(features), prompt, top_k=top_k)
        return list(pred.segments[0]) if pred.segments else [whole_video(features.n)]

    def _tg(self, examples, perturbation, rng):
        ranked_all, gts, samples = [], [], []
        for ex in examples:
            features = self.features(ex, perturbation, rng)
            ranked = self._ranked(features, ex.prompt, MAP_TOP_K)
            ranked_all.append(ranked)
            gts.append(ex.gt_segments)
            samples.append(SampleRecord(id=ex.id, pred=ranked, gt=ex.gt_segments,
                                        iou=best_iou(ranked[0], ex.gt_segments)))
        metrics = recall_at_iou([r[0] for r in ranked_all], gts)
        metrics.update(map_at_iou(ranked_all, gts))
        return metrics, samples

    def _hd(self, examples, perturbation, rng):
        scores, labels, samples = [], [], []
        for ex in examples:
            features = self.features(ex, perturbation, rng)
            duration = ex.effective_duration()
            pred = self.expert.ground(self.expert.visual_tokens(features), ex.prompt)
            if pred.locs:
                clip_scores = pool_clip_saliency(pred.locs[0].saliency, duration)
            else:
                clip_scores = np.zeros(max(1, math.ceil(duration / CLIP_SECONDS)))
            lab = clip_labels(clip_scores.shape[0], ex.clip_ids, ex.saliency,
                              gt_clips(ex.gt_segments, duration, features.n))
            hit, ap = hd_query(clip_scores, lab)
            scores.append(clip_scores)
            labels.append(lab)
            samples.append(SampleRecord(id=ex.id, pred=pred.top_segments, gt=ex.gt_segments, hit=hit, ap=ap))
        return hd_metrics(scores, labels), samples

    def _dvc_loc(self, examples, perturbation, rng):
        preds, gts, samples = [], [], []
        for ex in examples:
            features = self.features(ex, perturbation, rng)
            top = self.expert.ground(self.expert.visual_tokens(features), ex.prompt).top_segments
            preds.append(top)
            gts.append(ex.gt_segments)
            pairs = matched_pair_ious(top, ex.gt_segments)
            samples.append(SampleRecord(
                id=ex.id, pred=top, gt=ex.gt_segments, pair_ious=pairs,
                iou=sum(pairs) / len(pairs) if pairs else None,
                count_match=len(top) == len(ex.gt_segments),
            ))
        return dvc_loc_metrics(preds, gts), samples

    def _gqa(self, examples, perturbation, rng):
        answers, truths, segs, gts, samples = [], [], [], [], []
        for ex in examples:
            features = self.features(ex, perturbation, rng)
            visual = self.expert.visual_tokens(features)
            answer = self.expert.ground(visual, ex.prompt).text.strip()
            query = answer or ex.query
            ranked = self._ranked(features, TG_PROMPTS[0].format(query=query), 1)
            answers.append(answer)
            truths.append(ex.answer or "")
            segs.append(ranked[0])
            gts.append(ex.evidence)
            samples.append(SampleRecord(
                id=ex.id, pred=ranked[:1], gt=ex.evidence,
                iou=best_iou(ranked[0], ex.evidence), iop=best_iop(ranked[0], ex.evidence),
                correct=answer.lower() == (ex.answer or "").strip().lower(),
                pred_answer=answer, answer=ex.answer,
            ))
        return gqa_metrics(answers, truths, segs, gts), samples
