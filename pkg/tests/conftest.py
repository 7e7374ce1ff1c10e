"""Shared fixtures: a tiny run configuration and data that fits it."""

from __future__ import annotations

import numpy as np
import pytest
import torch

from vexpert.schema import (
    BackboneConfig,
    CompressParams,
    DualAdapterConfig,
    EventPlacement,
    FrameFeatureSet,
    HeadConfig,
    RunConfig,
    Segment,
    SynthRanges,
    SyntheticVideoSpec,
)
from vexpert.training.synth import synth_dataset


def tiny_config(**overrides) -> RunConfig:
    """A model small enough to train for a handful of steps inside a unit test."""
    base = dict(
        seed=0,
        n_frames=16,
        batch_size=4,
        lr=1e-3,
        epochs=1,
        max_response_tokens=8,
        compress=CompressParams(u=2, k=2, c=1),
        backbone=BackboneConfig(
            d_model=32, n_layers=2, n_heads=2, context=256, feat_dim=16,
            adapter=DualAdapterConfig(total_rank=8, lora_alpha=8.0),
        ),
        head=HeadConfig(conv_layers=1, atten_heads=2),
        synth=SynthRanges(
            n_frames=16, grid=(2, 2), feat_dim=16, n_classes=4, max_events=2,
            min_event_frames=2, max_event_frames=6, noise_sigma=0.05,
        ),
    )
    base.update(overrides)
    return RunConfig(**base)


def random_features(n: int, p: int, d: int, seed: int = 0) -> FrameFeatureSet:
    rng = np.random.default_rng(seed)
    attn = rng.random((n, p)) + 0.1
    attn = (attn / attn.sum(axis=1, keepdims=True)).astype(np.float64)
    return FrameFeatureSet(
        cls=rng.normal(size=(n, d)).astype(np.float32),
        patches=rng.normal(size=(n, p, d)).astype(np.float32),
        attn=attn.astype(np.float32),
    )


@pytest.fixture
def config() -> RunConfig:
    return tiny_config()


@pytest.fixture
def examples(config):
    return synth_dataset(12, config.synth, seed=3)


@pytest.fixture
def small_spec() -> SyntheticVideoSpec:
    return SyntheticVideoSpec(
        n_frames=10,
        grid=(2, 2),
        events=[EventPlacement(segment=Segment(start=3, end=6), class_id=1)],
        seed=7,
        feat_dim=16,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(0)
