# vexpert - Training loop
# Copyright (C) 2026 Free & Fair

"""
Boundary-aware training.

Per step: compress features, build [T, S, prompt, target] streams, run a
teacher-forced pass, read <LOC> hidden states at the target's <LOC>
positions, run the temporal head on every matched (<LOC>, ground truth)
pair, combine the losses and update adapters, <LOC>, g_phi and the head.

Only parameters with requires_grad enter AdamW, so the frozen base never
changes.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import torch

from ..errors import TrainingError
from ..model.checkpoint import load_checkpoint, load_trainer_state, save_checkpoint
from ..model.expert import VideoExpert, VisualTokens
from ..model.tokenizer import Tokenizer
from ..schema.types import GroundingMode, RunConfig, TrainExample
from .objectives import (
    LossBundle,
    boundary_loss,
    fg_labels,
    indicator_loss,
    match_locs,
    text_loss,
    total_loss,
)
from .synth import load_example_features
from .templates import render_timestamps, timestamp_words

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.jsonl"
DIAGNOSTICS_FILE = "nan-diagnostics.json"
CHECKPOINT_DIR = "checkpoints"


def build_tokenizer(examples: Sequence[TrainExample], n_frames: int) -> Tokenizer:
    """Vocabulary over every prompt, target and choice plus frame numbers."""
    texts: list[str] = []
    for ex in examples:
        texts.extend([ex.prompt, ex.target, ex.query, *ex.choices])
        if ex.answer:
            texts.append(ex.answer)
    return Tokenizer.build(texts, extra=timestamp_words(n_frames))


def lr_factor(step: int, total_steps: int, warmup_frac: float) -> float:
    """Linear warm-up then cosine decay to zero."""
    warmup = math.ceil(warmup_frac * total_steps)
    if step < warmup:
        return (step + 1) / warmup
    progress = (step - warmup) / max(1, total_steps - warmup)
    return 0.5 * (1.0 + math.cos(math.pi * min(progress, 1.0)))


@dataclass
class TrainResult:
    checkpoint: Path
    metrics: Path
    steps: int
    last: dict[str, float]


class Trainer:
    """
    Example:
        trainer = Trainer(config, synth_dataset(64, config.synth, seed=0), "runs/a")
        result = trainer.train()
        result.checkpoint  # runs/a/checkpoints/epoch-004
    """

    def __init__(
        self,
        config: RunConfig,
        examples: Sequence[TrainExample],
        out_dir: Path | str,
        base_dir: Optional[Path | str] = None,
        split: Optional[str] = "train",
        expert: Optional[VideoExpert] = None,
    ):
        self.config = config
        self.out_dir = Path(out_dir)
        self.base_dir = base_dir
        self.examples = [ex for ex in examples if split is None or ex.split == split]
        if not self.examples:
            raise TrainingError(f"no training examples in split {split!r}")

        torch.manual_seed(config.seed)
        self.expert = expert or VideoExpert(config, build_tokenizer(examples, config.n_frames))
        self.params = self.expert.optimizer_parameters()
        self.optimizer = torch.optim.AdamW(self.params, lr=config.lr, weight_decay=config.weight_decay)
        self.total_steps = self._planned_steps()
        self.scheduler = torch.optim.lr_scheduler.LambdaLR(
            self.optimizer, lambda s: lr_factor(s, self.total_steps, config.warmup_frac)
        )
        self.step_count = 0
        self.start_epoch = 0
        self._visual: dict[str, VisualTokens] = {}

    def _planned_steps(self) -> int:
        per_epoch = math.ceil(len(self.examples) / self.config.batch_size)
        planned = per_epoch * self.config.epochs
        return min(planned, self.config.max_steps) if self.config.max_steps else planned

    # -------------------------------------------------------------------------
    # Data
    # -------------------------------------------------------------------------

    def visual(self, example: TrainExample) -> VisualTokens:
        cached = self._visual.get(example.id)
        if cached is None:
            features = load_example_features(example, self.config.n_frames, self.base_dir)
            self.expert.check_compatible(features)
            cached = self._visual[example.id] = self.expert.visual_tokens(features)
        return cached

    def target_text(self, example: TrainExample) -> str:
        if self.config.grounding == GroundingMode.TEXT_TIMESTAMPS and example.gt_segments:
            return render_timestamps(example.target, example.gt_segments)
        return example.target

    def epoch_order(self, epoch: int) -> list[int]:
        rng = np.random.default_rng([self.config.seed, epoch])
        return [int(i) for i in rng.permutation(len(self.examples))]

    # -------------------------------------------------------------------------
    # Step
    # -------------------------------------------------------------------------

    def compute_loss(self, batch: Sequence[TrainExample]) -> LossBundle:
        samples = [(self.visual(ex), ex.prompt, self.target_text(ex)) for ex in batch]
        out = self.expert.forward_batch(samples)
        text = text_loss(out.logits, out.labels)

        ce_terms, l1_terms, giou_terms = [], [], []
        head = self.expert.head
        if head is not None:
            for b, ex in enumerate(batch):
                match = match_locs(out.loc_hidden[b], ex.gt_segments)
                n = out.t_hidden[b].shape[0]
                for li, gi in match.pairs:
                    gt = ex.gt_segments[gi]
                    probs, offsets = head(out.t_hidden[b], out.loc_hidden[b][li])
                    labels = fg_labels(gt, n).to(probs.dtype)
                    ce_terms.append(indicator_loss(probs, labels))
                    l1, giou = boundary_loss(offsets, labels, gt)
                    l1_terms.append(l1)
                    giou_terms.append(giou)

        zero = text.new_zeros(())
        ce = torch.stack(ce_terms).mean() if ce_terms else zero
        l1 = torch.stack(l1_terms).mean() if l1_terms else zero
        giou = torch.stack(giou_terms).mean() if giou_terms else zero
        return total_loss(text, ce, l1, giou, self.config.weights)

    def step(self, batch: Sequence[TrainExample], epoch: int = 0) -> LossBundle:
        self.expert.train()
        bundle = self.compute_loss(batch)
        if not bundle.is_finite():
            self._dump_diagnostics(batch, bundle, epoch)
            raise TrainingError(
                f"non-finite loss at step {self.step_count}: {bundle.as_floats()} "
                f"(diagnostics in {self.out_dir / DIAGNOSTICS_FILE})"
            )
        self.optimizer.zero_grad(set_to_none=True)
        bundle.total.backward()
        torch.nn.utils.clip_grad_norm_(self.params, self.config.grad_clip)
        self.optimizer.step()
        self.scheduler.step()
        self.step_count += 1
        return bundle

    def _dump_diagnostics(self, batch: Sequence[TrainExample], bundle: LossBundle, epoch: int) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        grads = {
            name: float(p.grad.norm()) if p.grad is not None else None
            for name, p in self.expert.named_parameters() if p.requires_grad
        }
        dump = {
            "step": self.step_count,
            "epoch": epoch,
            "example_ids": [ex.id for ex in batch],
            "losses": {k: (v if math.isfinite(v) else str(v)) for k, v in bundle.as_floats().items()},
            "lr": self.scheduler.get_last_lr()[0],
            "last_grad_norms": grads,
        }
        (self.out_dir / DIAGNOSTICS_FILE).write_text(json.dumps(dump, indent=2, sort_keys=True))

    # -------------------------------------------------------------------------
    # Loop
    # -------------------------------------------------------------------------

    def trainer_state(self, epoch: int) -> dict[str, Any]:
        return {
            "optimizer": self.optimizer.state_dict(),
            "scheduler": self.scheduler.state_dict(),
            "step": self.step_count,
            "epoch": epoch,
            "total_steps": self.total_steps,
            "torch_rng": torch.get_rng_state(),
        }

    def train(self) -> TrainResult:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        metrics_path = self.out_dir / METRICS_FILE
        mode = "a" if self.start_epoch > 0 else "w"
        last: dict[str, float] = {}
        checkpoint = self.out_dir / CHECKPOINT_DIR
        bs = self.config.batch_size

        with metrics_path.open(mode, encoding="utf-8") as log:
            for epoch in range(self.start_epoch, self.config.epochs):
                order = self.epoch_order(epoch)
                for i in range(0, len(order), bs):
                    if self.config.max_steps and self.step_count >= self.config.max_steps:
                        break
                    batch = [self.examples[j] for j in order[i : i + bs]]
                    lr = self.scheduler.get_last_lr()[0]
                    bundle = self.step(batch, epoch)
                    last = bundle.as_floats()
                    record = {"step": self.step_count, "epoch": epoch, **last, "lr": lr}
                    log.write(json.dumps(record, sort_keys=True) + "\n")
                    logger.debug("step %d %s", self.step_count, last)
                log.flush()
                checkpoint = save_checkpoint(
                    self.expert, self.out_dir / CHECKPOINT_DIR / f"epoch-{epoch:03d}", self.trainer_state(epoch)
                )
                logger.info("epoch %d done at step %d: %s", epoch, self.step_count, last)
                if self.config.max_steps and self.step_count >= self.config.max_steps:
                    break

        return TrainResult(checkpoint=checkpoint, metrics=metrics_path, steps=self.step_count, last=last)

    @classmethod
    def resume(
        cls,
        checkpoint: Path | str,
        examples: Sequence[TrainExample],
        out_dir: Path | str,
        base_dir: Optional[Path | str] = None,
        split: Optional[str] = "train",
    ) -> Trainer:
        """Continue after the epoch stored in ``checkpoint``."""
        state = load_trainer_state(checkpoint)
        if state is None:
            raise TrainingError(f"{checkpoint}: no trainer state to resume from")
        expert = load_checkpoint(checkpoint)
        trainer = cls(expert.config, examples, out_dir, base_dir=base_dir, split=split, expert=expert)
        trainer.optimizer.load_state_dict(state["optimizer"])
        trainer.scheduler.load_state_dict(state["scheduler"])
        trainer.step_count = int(state["step"])
        trainer.start_epoch = int(state["epoch"]) + 1
        torch.set_rng_state(state["torch_rng"])
        logger.info("resuming at epoch %d, step %d", trainer.start_epoch, trainer.step_count)
        return trainer
