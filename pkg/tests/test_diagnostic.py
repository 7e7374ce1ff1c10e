"""Tests for the language-bias diagnostic."""

import numpy as np
import pytest

from conftest import random_features
from vexpert.errors import EvalError
from vexpert.evaluation.diagnostic import bias_diagnostic, histogram, normalized, perturb
from vexpert.schema import Perturbation, Segment, SynthRanges, Task
from vexpert.training.synth import oracle_grounder, synth_dataset
from vexpert.video.frontend import encode_synthetic


def constant_grounder(features, prompt):
    return Segment(start=2, end=5)


def test_constant_model_is_flagged():
    samples = [(random_features(10, 4, 8, seed=s), "prompt") for s in range(6)]
    report = bias_diagnostic(constant_grounder, samples)
    assert set(report.results) == {"none", "shuffle", "blank"}
    for result in report.results.values():
        assert result.mode_share == pytest.approx(1.0)
    assert report.sensitivity == 0.0
    assert report.blank_change == 0.0


def test_oracle_follows_the_video():
    ranges = SynthRanges(n_frames=100, grid=(2, 2), feat_dim=16, n_classes=4, max_events=2,
                         min_event_frames=8, max_event_frames=20, noise_sigma=0.05,
                         task_mix={Task.TG: 1.0})
    samples = [(encode_synthetic(ex.video), ex.prompt) for ex in synth_dataset(20, ranges, seed=4)]
    report = bias_diagnostic(oracle_grounder(), samples, seed=1)
    assert report.sensitivity >= 0.9
    assert report.results["none"].mode_share < 0.5


def test_none_is_always_included():
    samples = [(random_features(10, 4, 8), "p")]
    report = bias_diagnostic(constant_grounder, samples, perturbations=[Perturbation.SHUFFLE])
    assert set(report.results) == {"none", "shuffle"}
    assert report.blank_change is None


def test_no_samples():
    with pytest.raises(EvalError):
        bias_diagnostic(constant_grounder, [])


def test_histogram_mass():
    hist = histogram([(0.0, 0.1), (0.5, 1.0), (0.5, 1.7)], bins=10)
    assert hist.sum() == pytest.approx(1.0)
    assert hist[5, 9] == pytest.approx(2 / 3)
    assert histogram([], bins=4).sum() == 0.0


def test_normalized_coordinates():
    assert normalized(Segment(start=0, end=99), 100) == (0.0, 1.0)


def test_shuffle_keeps_frames():
    features = random_features(12, 4, 8, seed=5)
    shuffled = perturb(features, Perturbation.SHUFFLE, np.random.default_rng(0))
    assert shuffled.n == 12
    original = sorted(map(tuple, features.cls.tolist()))
    assert sorted(map(tuple, shuffled.cls.tolist())) == original
    assert perturb(features, Perturbation.NONE, np.random.default_rng(0)) is features


def test_blank_video():
    blank = perturb(random_features(5, 4, 8), Perturbation.BLANK, np.random.default_rng(0))
    assert not blank.cls.any()
    assert not blank.patches.any()
    np.testing.assert_allclose(blank.attn, 0.25)
