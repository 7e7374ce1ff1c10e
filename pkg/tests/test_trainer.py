"""Tests for the training loop."""

import json
import math

import pytest
import torch

from conftest import tiny_config
from vexpert.errors import TrainingError
from vexpert.model.checkpoint import load_checkpoint
from vexpert.schema import GroundingMode, LossWeights, Task
from vexpert.training.objectives import total_loss
from vexpert.training.synth import synth_dataset
from vexpert.training.trainer import (
    CHECKPOINT_DIR,
    DIAGNOSTICS_FILE,
    METRICS_FILE,
    Trainer,
    lr_factor,
)


def tg_examples(config, size=8, seed=0):
    ranges = config.synth.model_copy(update={"task_mix": {Task.TG: 1.0}})
    return synth_dataset(size, ranges, seed=seed)


def test_lr_schedule():
    total = 100
    assert lr_factor(0, total, 0.1) == pytest.approx(0.1)
    assert lr_factor(9, total, 0.1) == pytest.approx(1.0)
    assert lr_factor(10, total, 0.1) == pytest.approx(1.0)
    assert lr_factor(55, total, 0.1) == pytest.approx(0.5)
    assert lr_factor(100, total, 0.1) == pytest.approx(0.0, abs=1e-12)
    values = [lr_factor(s, total, 0.1) for s in range(10, 101)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_no_examples_in_split(tmp_path, config, examples):
    with pytest.raises(TrainingError, match="no training examples"):
        Trainer(config, examples, tmp_path, split="nowhere")


def test_base_weights_never_move(tmp_path):
    config = tiny_config(weights=LossWeights(text=0.0))
    trainer = Trainer(config, tg_examples(config), tmp_path, split=None)
    before = {k: v.detach().clone() for k, v in trainer.expert.backbone.base_parameters().items()}
    trainer.step(trainer.examples[:4])
    after = trainer.expert.backbone.base_parameters()
    for name, value in before.items():
        assert torch.equal(value, after[name]), name


def test_trainable_parameters_move(tmp_path, config):
    trainer = Trainer(config, tg_examples(config), tmp_path, split=None)
    before = [p.detach().clone() for p in trainer.expert.head.parameters()]
    trainer.step(trainer.examples[:4])
    assert any(not torch.equal(a, b) for a, b in zip(before, trainer.expert.head.parameters()))


def test_loss_decreases_on_a_fixed_batch(tmp_path):
    config = tiny_config(lr=3e-3, warmup_frac=0.0, max_steps=50, epochs=50)
    trainer = Trainer(config, tg_examples(config, size=4), tmp_path, split=None)
    batch = trainer.examples
    first = trainer.compute_loss(batch).total.item()
    for _ in range(50):
        last = trainer.step(batch).total.item()
    assert last < 0.7 * first


def test_non_finite_loss_stops_training(tmp_path, config, monkeypatch):
    trainer = Trainer(config, tg_examples(config), tmp_path, split=None)

    def broken(batch):
        return total_loss(float("nan"), 0.0, 0.0, 0.0, config.weights)

    monkeypatch.setattr(trainer, "compute_loss", broken)
    with pytest.raises(TrainingError, match="non-finite loss at step 0"):
        trainer.step(trainer.examples[:2])
    dump = json.loads((tmp_path / DIAGNOSTICS_FILE).read_text())
    assert dump["step"] == 0
    assert dump["losses"]["text"] == "nan"
    assert dump["example_ids"] == [ex.id for ex in trainer.examples[:2]]


def test_train_writes_metrics_and_checkpoint(tmp_path, config):
    trainer = Trainer(config, tg_examples(config), tmp_path, split=None)
    result = trainer.train()
    assert result.steps == 2
    assert result.checkpoint == tmp_path / CHECKPOINT_DIR / "epoch-000"
    rows = [json.loads(line) for line in (tmp_path / METRICS_FILE).read_text().splitlines()]
    assert [r["step"] for r in rows] == [1, 2]
    assert {"text", "ce", "l1", "giou", "total", "lr"} <= set(rows[0])
    assert all(math.isfinite(r["total"]) for r in rows)
    assert load_checkpoint(result.checkpoint).config == config


def test_max_steps_caps_training(tmp_path):
    config = tiny_config(epochs=3, max_steps=3)
    result = Trainer(config, tg_examples(config), tmp_path, split=None).train()
    assert result.steps == 3


def test_resume_continues_the_same_run(tmp_path):
    config = tiny_config(epochs=2)
    data = tg_examples(config)

    straight = Trainer(config, data, tmp_path / "a", split=None)
    straight.train()
    expected = [json.loads(line) for line in (tmp_path / "a" / METRICS_FILE).read_text().splitlines()]

    resumed = Trainer.resume(tmp_path / "a" / CHECKPOINT_DIR / "epoch-000", data, tmp_path / "b", split=None)
    assert resumed.start_epoch == 1
    assert resumed.step_count == 2
    resumed.train()
    got = [json.loads(line) for line in (tmp_path / "b" / METRICS_FILE).read_text().splitlines()]

    assert [r["step"] for r in got] == [3, 4]
    for mine, theirs in zip(got, expected[2:]):
        assert mine["total"] == pytest.approx(theirs["total"], abs=1e-6)
        assert mine["lr"] == pytest.approx(theirs["lr"])


def test_resume_needs_trainer_state(tmp_path, config):
    with pytest.raises(TrainingError, match="no trainer state"):
        Trainer.resume(tmp_path, tg_examples(config), tmp_path)


def test_text_timestamp_training(tmp_path):
    config = tiny_config(grounding=GroundingMode.TEXT_TIMESTAMPS, max_target_tokens=64)
    trainer = Trainer(config, tg_examples(config), tmp_path, split=None)
    ex = trainer.examples[0]
    assert " to " in trainer.target_text(ex)
    bundle = trainer.step(trainer.examples[:4])
    assert bundle.as_floats()["ce"] == 0.0
    assert math.isfinite(bundle.as_floats()["text"])
