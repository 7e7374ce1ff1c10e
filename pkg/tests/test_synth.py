"""Tests for synthetic dataset generation, the oracle and persistence."""

import json

import numpy as np
import pytest

from vexpert.errors import DataError
from vexpert.schema import LOC_TOKEN, Segment, SynthRanges, Task
from vexpert.training.synth import (
    class_phrase,
    dataset_split,
    load_dataset,
    load_example_features,
    oracle_classes,
    oracle_grounder,
    oracle_locate,
    save_dataset,
    split_of,
    synth_dataset,
)
from vexpert.video.frontend import encode_synthetic


def test_generation_is_deterministic(config):
    a = synth_dataset(10, config.synth, seed=5)
    b = synth_dataset(10, config.synth, seed=5)
    assert [ex.model_dump(mode="json") for ex in a] == [ex.model_dump(mode="json") for ex in b]
    c = synth_dataset(10, config.synth, seed=6)
    assert [ex.model_dump(mode="json") for ex in a] != [ex.model_dump(mode="json") for ex in c]


def test_examples_are_consistent(examples, config):
    for ex in examples:
        assert ex.video.n_frames == config.synth.n_frames
        for seg in ex.gt_segments + ex.evidence:
            assert seg.within(config.synth.n_frames)
        if ex.task == Task.VQA:
            assert ex.answer in ex.choices
            assert LOC_TOKEN not in ex.target
        else:
            assert ex.target.count(LOC_TOKEN) == len(ex.gt_segments)


def test_events_are_disjoint_and_ordered():
    ranges = SynthRanges(n_frames=40, grid=(2, 2), feat_dim=16, n_classes=6, max_events=3,
                         min_event_frames=3, max_event_frames=10)
    for ex in synth_dataset(30, ranges, seed=2):
        runs = [ev.segment for ev in ex.video.events]
        for a, b in zip(runs, runs[1:]):
            assert a.end < b.start


def test_negative_size():
    with pytest.raises(DataError):
        synth_dataset(-1)


def test_noise_free_oracle_is_exact():
    ranges = SynthRanges(n_frames=40, grid=(2, 2), feat_dim=16, n_classes=6, max_events=3,
                         min_event_frames=3, max_event_frames=10, noise_sigma=0.0,
                         task_mix={Task.TG: 1.0})
    for ex in synth_dataset(20, ranges, seed=9):
        features = encode_synthetic(ex.video)
        found = oracle_locate(features, ex.event_classes[0])
        assert (found.start, found.end) == (ex.gt_segments[0].start, ex.gt_segments[0].end)


def test_oracle_classes_follow_events(small_spec):
    labels = oracle_classes(encode_synthetic(small_spec.model_copy(update={"noise_sigma": 0.0})), 4)
    assert labels.tolist() == [0, 0, 0, 1, 1, 1, 1, 0, 0, 0]


def test_oracle_grounder_reads_the_phrase(small_spec):
    features = encode_synthetic(small_spec.model_copy(update={"noise_sigma": 0.0}))
    grounder = oracle_grounder()
    seg = grounder(features, f"When does {class_phrase(1)} happen in the video?")
    assert (seg.start, seg.end) == (3.0, 6.0)
    fallback = grounder(features, "unknown event")
    assert (fallback.start, fallback.end) == (0.0, 9.0)


def test_background_has_no_phrase():
    with pytest.raises(DataError, match="background"):
        class_phrase(0)


def test_split_is_stable():
    assert split_of("synth-0-000001") == split_of("synth-0-000001")
    splits = {split_of(f"synth-0-{i:06d}") for i in range(200)}
    assert splits == {"train", "val", "test"}


def test_dataset_split(examples):
    train = dataset_split(examples, "train")
    assert all(ex.split == "train" for ex in train)
    assert len(train) + len(dataset_split(examples, "val")) + len(dataset_split(examples, "test")) == len(examples)


def test_save_and_load(tmp_path, examples):
    path = save_dataset(examples, tmp_path / "data" / "dataset.jsonl")
    loaded = load_dataset(path)
    assert [ex.model_dump(mode="json") for ex in loaded] == [ex.model_dump(mode="json") for ex in examples]


def test_bad_dataset_line(tmp_path, examples):
    path = tmp_path / "dataset.jsonl"
    save_dataset(examples[:2], path)
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps({"id": "x"}) + "\n")
    with pytest.raises(DataError, match=":3: invalid example"):
        load_dataset(path)


def test_missing_dataset(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_dataset(tmp_path / "nope.jsonl")


def test_features_are_resampled(examples):
    features = load_example_features(examples[0], n_frames=8)
    assert features.n == 8
    np.testing.assert_array_equal(load_example_features(examples[0]).cls, encode_synthetic(examples[0].video).cls)
