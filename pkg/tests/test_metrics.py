"""Tests for evaluation metrics against straightforward recomputations."""

import numpy as np
import pytest

from vexpert.errors import EvalError
from vexpert.evaluation.metrics import (
    MAP_THRESHOLDS,
    average_precision,
    clip_labels,
    dvc_loc_metrics,
    gqa_metrics,
    hd_metrics,
    map_at_iou,
    recall_at_iou,
)
from vexpert.schema import Segment, iou_1d


def seg(s, e, score=1.0):
    return Segment(start=s, end=e, score=score)


def random_segment(rng, n=50, score=None):
    s, e = sorted(rng.uniform(0, n, size=2))
    return seg(s, e, rng.random() if score is None else score)


def loop_recall(preds, gts, t):
    hits = 0
    for p, g in zip(preds, gts):
        if max(iou_1d(p, x) for x in g) >= t:
            hits += 1
    return hits / len(preds)


def loop_ap(ranked, gts, t):
    """Greedy matching by score, then the area under the upper envelope of the PR curve."""
    ranked = sorted(enumerate(ranked), key=lambda item: (-item[1].score, item[0]))
    claimed = set()
    flags = []
    for _, p in ranked:
        candidates = sorted(range(len(gts)), key=lambda j: -iou_1d(p, gts[j]))
        hit = False
        for j in candidates:
            if iou_1d(p, gts[j]) < t:
                break
            if j not in claimed:
                claimed.add(j)
                hit = True
                break
        flags.append(hit)
    precisions = [sum(flags[: k + 1]) / (k + 1) for k in range(len(flags))]
    ap = 0.0
    for k, hit in enumerate(flags):
        if hit:
            ap += max(precisions[k:]) / len(gts)
    return ap


# =============================================================================
# Grounding
# =============================================================================

def test_recall_example():
    out = recall_at_iou([seg(0, 10)], [[seg(5, 15)]])
    assert out["R1@0.3"] == 1.0
    assert out["R1@0.5"] == 0.0
    assert out["mIoU"] == pytest.approx(1 / 3)


def test_recall_matches_loop(rng):
    for _ in range(50):
        preds = [random_segment(rng) for _ in range(6)]
        gts = [[random_segment(rng) for _ in range(rng.integers(1, 3))] for _ in range(6)]
        out = recall_at_iou(preds, gts)
        for t in (0.3, 0.5, 0.7):
            assert out[f"R1@{t}"] == pytest.approx(loop_recall(preds, gts, t), abs=1e-9)
        expected_miou = np.mean([max(iou_1d(p, x) for x in g) for p, g in zip(preds, gts)])
        assert out["mIoU"] == pytest.approx(expected_miou, abs=1e-9)
        assert out["R1@0.3"] >= out["R1@0.5"] >= out["R1@0.7"]


def test_recall_input_checks():
    with pytest.raises(EvalError):
        recall_at_iou([], [])
    with pytest.raises(EvalError):
        recall_at_iou([seg(0, 1)], [])


def test_perfect_ranking_has_unit_ap():
    gts = [seg(0, 10), seg(20, 30)]
    ranked = [seg(0, 10, 0.9), seg(20, 30, 0.8), seg(40, 45, 0.1)]
    assert average_precision(ranked, gts, 0.5) == pytest.approx(1.0)


def test_ap_with_a_miss_first():
    gts = [seg(0, 10)]
    ranked = [seg(30, 40, 0.9), seg(0, 10, 0.5)]
    assert average_precision(ranked, gts, 0.5) == pytest.approx(0.5)


def test_duplicates_do_not_count_twice():
    gts = [seg(0, 10)]
    ranked = [seg(0, 10, 0.9), seg(0, 10, 0.8)]
    assert average_precision(ranked, gts, 0.5) == pytest.approx(1.0)
    assert map_at_iou([ranked], [gts])["mAP@0.5"] == pytest.approx(1.0)


def test_ap_matches_loop(rng):
    for _ in range(50):
        gts = [random_segment(rng) for _ in range(rng.integers(1, 4))]
        ranked = [random_segment(rng) for _ in range(rng.integers(0, 8))]
        for t in (0.3, 0.5, 0.7):
            assert average_precision(ranked, gts, t) == pytest.approx(loop_ap(ranked, gts, t), abs=1e-9)


def test_map_keys_and_average(rng):
    ranked = [[random_segment(rng) for _ in range(5)] for _ in range(20)]
    gts = [[random_segment(rng)] for _ in range(20)]
    out = map_at_iou(ranked, gts)
    assert len(MAP_THRESHOLDS) == 10
    assert set(out) == {f"mAP@{t:g}" for t in MAP_THRESHOLDS} | {"mAP@Avg"}
    assert out["mAP@Avg"] == pytest.approx(np.mean([out[f"mAP@{t:g}"] for t in MAP_THRESHOLDS]))
    values = [out[f"mAP@{t:g}"] for t in MAP_THRESHOLDS]
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


def test_map_ignores_monotone_score_rescaling(rng):
    ranked = [[random_segment(rng) for _ in range(6)] for _ in range(15)]
    gts = [[random_segment(rng), random_segment(rng)] for _ in range(15)]
    rescaled = [[seg(p.start, p.end, 3.0 * p.score ** 3 + 1.0) for p in r] for r in ranked]
    assert map_at_iou(ranked, gts) == map_at_iou(rescaled, gts)


def test_ap_needs_ground_truth():
    with pytest.raises(EvalError):
        average_precision([seg(0, 1)], [], 0.5)


# =============================================================================
# Highlight detection
# =============================================================================

def test_mixed_highlight_fixture():
    scores = [np.array([0.9, 0.1, 0.5]), np.array([0.9, 0.5, 0.1])]
    labels = [np.array([4, 0, 4]), np.array([0, 4, 0])]
    out = hd_metrics(scores, labels)
    assert out["HIT@1"] == pytest.approx(0.5)
    assert out["HD-mAP"] == pytest.approx(0.75)


def test_annotators_are_averaged():
    scores = [np.array([0.9, 0.1])]
    labels = [np.array([[4, 0], [0, 4]])]
    out = hd_metrics(scores, labels)
    assert out["HIT@1"] == pytest.approx(0.5)
    assert out["HD-mAP"] == pytest.approx(0.75)


def test_queries_without_very_good_clips_skip_map():
    out = hd_metrics([np.array([0.3, 0.2])], [np.array([2, 3])])
    assert out == {"HIT@1": 0.0, "HD-mAP": 0.0}


def test_clip_label_shapes():
    dense = clip_labels(5, clip_ids=[1, 3], saliency=[[4, 2, 1], [0, 4, 4]])
    assert dense.shape == (5, 3)
    assert dense[1].tolist() == [4, 2, 1]
    assert dense[0].tolist() == [0, 0, 0]
    sparse = clip_labels(4, gt_clips=[2, 3, 9])
    assert sparse[:, 0].tolist() == [0, 0, 4, 4]


def test_highlight_length_mismatch():
    with pytest.raises(EvalError):
        hd_metrics([np.zeros(3)], [np.zeros(4)])


# =============================================================================
# Grounded QA and dense captioning
# =============================================================================

def test_grounded_qa_partial_overlap():
    out = gqa_metrics(["To Leave "], ["to leave"], [seg(0, 10)], [[seg(6, 20)]])
    assert out["Acc@QA"] == 1.0
    assert out["mIoP"] == pytest.approx(0.4)
    assert out["IoP@0.3"] == 1.0
    assert out["IoP@0.5"] == 0.0
    assert out["mIoU"] == pytest.approx(0.2)
    assert out["Acc@GQA"] == 0.0


def test_grounded_qa_matches_loop(rng):
    answers = ["a", "b", "c"]
    preds = [random_segment(rng) for _ in range(30)]
    gts = [[random_segment(rng)] for _ in range(30)]
    truth = [answers[i % 3] for i in range(30)]
    guessed = [answers[int(rng.integers(3))] for _ in range(30)]
    out = gqa_metrics(guessed, truth, preds, gts)
    expected = np.mean([
        g == t and (max(0.0, min(p.end, x[0].end) - max(p.start, x[0].start)) / p.length if p.length > 0 else 0) >= 0.5
        for g, t, p, x in zip(guessed, truth, preds, gts)
    ])
    assert out["Acc@GQA"] == pytest.approx(expected, abs=1e-9)
    assert out["Acc@GQA"] <= out["Acc@QA"]


def test_dense_caption_localization():
    preds = [[seg(0, 10), seg(20, 30)]]
    gts = [[seg(0, 10), seg(20, 40), seg(50, 60)]]
    out = dvc_loc_metrics(preds, gts)
    assert out["count_fidelity"] == 0.0
    assert out["pair_mIoU"] == pytest.approx(0.75)
    assert out["Recall@0.5"] == pytest.approx(2 / 3)
    assert out["Recall@0.7"] == pytest.approx(1 / 3)


def test_dense_caption_without_locs():
    out = dvc_loc_metrics([[]], [[seg(0, 1)]])
    assert out["pair_mIoU"] == 0.0
    assert out["Recall@0.3"] == 0.0


def test_highlight_matches_loop(rng):
    for _ in range(50):
        n = int(rng.integers(3, 9))
        scores = rng.random(n)
        labels = rng.integers(0, 5, size=n)
        out = hd_metrics([scores], [labels])
        order = sorted(range(n), key=lambda i: (-scores[i], i))
        assert out["HIT@1"] == float(labels[order[0]] >= 4)
        hits = [labels[i] >= 4 for i in order]
        if any(hits):
            precisions = [sum(hits[: k + 1]) / (k + 1) for k in range(n)]
            expected = sum(max(precisions[k:]) for k in range(n) if hits[k]) / sum(hits)
        else:
            expected = 0.0
        assert out["HD-mAP"] == pytest.approx(expected, abs=1e-9)
