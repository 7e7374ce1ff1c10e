"""Tests for the temporal head and segment decoding."""

import numpy as np
import pytest
import torch
import torch.nn.functional as F
from torch import nn

from vexpert.errors import ConfigError, ModelError
from vexpert.model.head import TemporalHead, decode_segments, pool_clip_saliency, saliency
from vexpert.schema import HeadConfig, InteractionMode, iou_1d

D = 8


def make_head(**overrides) -> TemporalHead:
    torch.manual_seed(0)
    cfg = dict(conv_layers=2, kernel_size=3, atten_heads=2)
    cfg.update(overrides)
    return TemporalHead(HeadConfig(**cfg), D).double()


def zero_(module: nn.Module, bias: float = 0.0):
    with torch.no_grad():
        for name, p in module.named_parameters():
            if name.endswith("bias"):
                p.fill_(bias)
            else:
                p.zero_()


# =============================================================================
# <LOC> projection and reweighting
# =============================================================================

def test_zero_mlp_gives_its_bias():
    head = make_head()
    zero_(head.loc_mlp)
    with torch.no_grad():
        head.loc_mlp[2].bias.copy_(torch.arange(D, dtype=torch.float64))
    h_loc = head.project_loc(torch.randn(D, dtype=torch.float64))
    torch.testing.assert_close(h_loc, torch.arange(D, dtype=torch.float64))


def test_identity_mlp():
    head = make_head(mlp_activation="identity")
    with torch.no_grad():
        for layer in (head.loc_mlp[0], head.loc_mlp[2]):
            layer.weight.copy_(torch.eye(D))
            layer.bias.zero_()
    h = torch.randn(D, dtype=torch.float64)
    torch.testing.assert_close(head.project_loc(h), h)


def test_mlp_matches_two_matmuls():
    head = make_head()
    h = torch.randn(D, dtype=torch.float64)
    a, b = head.loc_mlp[0], head.loc_mlp[2]
    expected = F.gelu(h @ a.weight.T + a.bias) @ b.weight.T + b.bias
    torch.testing.assert_close(head.project_loc(h), expected, atol=1e-6, rtol=0)


def test_loc_ablation_zeroes_h_loc():
    head = make_head(use_loc=False)
    assert torch.equal(head.project_loc(torch.randn(D, dtype=torch.float64)), torch.zeros(D, dtype=torch.float64))


def test_add_mode():
    head = make_head()
    x = torch.randn(5, D, dtype=torch.float64)
    assert torch.equal(head.reweight(x, torch.zeros(D, dtype=torch.float64)), x)
    h = torch.randn(D, dtype=torch.float64)
    torch.testing.assert_close(head.reweight(x[:1], h)[0], x[0] + h)


def test_concat_with_identity_projection():
    head = make_head(mode=InteractionMode.CONCAT)
    with torch.no_grad():
        head.concat_proj.weight.copy_(torch.cat([torch.eye(D), torch.zeros(D, D)], dim=1))
        head.concat_proj.bias.zero_()
    x = torch.randn(5, D, dtype=torch.float64)
    torch.testing.assert_close(head.reweight(x, torch.randn(D, dtype=torch.float64)), x)


def test_self_attention_mode_shapes():
    head = make_head(mode=InteractionMode.SELF_ATTEN)
    x = torch.randn(2, 5, D, dtype=torch.float64)
    assert head.reweight(x, torch.randn(2, D, dtype=torch.float64)).shape == (2, 5, D)


def test_unknown_mode():
    head = make_head()
    with pytest.raises(ModelError, match="unknown interaction mode"):
        head.reweight(torch.zeros(3, D), torch.zeros(D), mode="multiply")


def test_heads_must_divide_width():
    with pytest.raises(ConfigError):
        TemporalHead(HeadConfig(mode=InteractionMode.SELF_ATTEN, atten_heads=3), D)


# =============================================================================
# Branches
# =============================================================================

def test_zero_indicator_gives_sigmoid_of_bias():
    head = make_head()
    zero_(head.indicator_branch, bias=0.3)
    probs = head.indicator(torch.randn(6, D, dtype=torch.float64))
    torch.testing.assert_close(probs, torch.full((6,), torch.sigmoid(torch.tensor(0.3, dtype=torch.float64)).item(),
                                                 dtype=torch.float64))


def naive_conv(x: torch.Tensor, conv: nn.Conv1d) -> torch.Tensor:
    """x: [n x c_in] -> [n x c_out] with zero same-padding, one position at a time."""
    n = x.shape[0]
    k = conv.kernel_size[0]
    pad = k // 2
    out = torch.zeros(n, conv.out_channels, dtype=x.dtype)
    for i in range(n):
        for o in range(conv.out_channels):
            acc = conv.bias[o].clone()
            for j in range(k):
                src = i + j - pad
                if 0 <= src < n:
                    acc = acc + (conv.weight[o, :, j] * x[src]).sum()
            out[i, o] = acc
    return out


def test_indicator_matches_direct_convolution():
    head = make_head()
    x = torch.randn(5, D, dtype=torch.float64)
    with torch.no_grad():
        y = x
        for conv in head.indicator_branch.convs:
            y = torch.relu(naive_conv(y, conv))
        expected = torch.sigmoid(naive_conv(y, head.indicator_branch.out))[:, 0]
        torch.testing.assert_close(head.indicator(x), expected, atol=1e-5, rtol=0)


def test_zero_boundary_gives_constant_offsets():
    head = make_head()
    zero_(head.boundary_branch, bias=0.5)
    offsets = head.boundary(torch.randn(7, D, dtype=torch.float64))
    expected = F.softplus(torch.tensor(0.5, dtype=torch.float64)) * head.config.offset_scale
    torch.testing.assert_close(offsets, torch.full((7, 2), expected.item(), dtype=torch.float64))


def test_outputs_in_range():
    head = make_head()
    probs, offsets = head(torch.randn(9, D, dtype=torch.float64), torch.randn(D, dtype=torch.float64))
    assert probs.shape == (9,) and offsets.shape == (9, 2)
    assert ((probs >= 0) & (probs <= 1)).all()
    assert (offsets >= 0).all()


@pytest.mark.parametrize("mode", list(InteractionMode))
def test_head_gradients_against_finite_differences(mode):
    head = make_head(mode=mode, conv_layers=1)
    for seed in range(20):
        g = torch.Generator().manual_seed(seed)
        x = torch.randn(4, D, generator=g, dtype=torch.float64, requires_grad=True)
        h = torch.randn(D, generator=g, dtype=torch.float64, requires_grad=True)

        assert torch.autograd.gradcheck(head, (x, h), eps=1e-6)


# =============================================================================
# Decoding
# =============================================================================

def test_one_hot_decoding():
    probs = np.zeros(10)
    probs[5] = 1.0
    offsets = np.zeros((10, 2))
    offsets[5] = (2, 3)
    [seg] = decode_segments(probs, offsets, top_k=1)
    assert (seg.start, seg.end, seg.score) == (3.0, 8.0, 1.0)


def test_identical_candidates_collapse():
    n = 5
    offsets = np.stack([np.arange(n), n - 1 - np.arange(n)], axis=1).astype(float)
    segs = decode_segments(np.full(n, 0.5), offsets, top_k=10)
    assert len(segs) == 1
    assert (segs[0].start, segs[0].end) == (0.0, 4.0)


def reference_nms(probs, offsets, top_k, thr):
    n = len(probs)
    cands = [(max(0.0, i - offsets[i, 0]), min(n - 1.0, i + offsets[i, 1]), probs[i], i) for i in range(n)]
    cands.sort(key=lambda c: (-c[2], c[3]))
    kept = []
    for c in cands:
        if all(iou_1d(c[:2], k[:2]) < thr for k in kept):
            kept.append(c)
    return [(s, e, sc) for s, e, sc, _ in kept[:top_k]]


def test_nms_matches_reference(rng):
    for _ in range(10):
        probs = rng.random(10)
        offsets = rng.uniform(0, 4, size=(10, 2))
        got = [(s.start, s.end, s.score) for s in decode_segments(probs, offsets, top_k=10, nms_iou=0.5)]
        expected = reference_nms(probs, offsets, 10, 0.5)
        assert len(got) == len(expected)
        np.testing.assert_allclose(np.array(got), np.array(expected))


@pytest.mark.parametrize(
    "transform",
    [lambda p: p**3, lambda p: 2.0 * p + 1.0, np.sqrt, lambda p: np.exp(5.0 * p), lambda p: 1.0 / (1.0 - 0.5 * p)],
)
def test_decoding_invariant_under_monotone_rescaling(rng, transform):
    for _ in range(20):
        probs = rng.random(16)
        offsets = rng.uniform(0, 5, size=(16, 2))
        base = decode_segments(probs, offsets, top_k=10, nms_iou=0.5)
        scaled = decode_segments(transform(probs), offsets, top_k=10, nms_iou=0.5)
        assert [(s.start, s.end) for s in scaled] == [(s.start, s.end) for s in base]


def test_top_k_must_be_positive():
    with pytest.raises(ModelError):
        decode_segments(np.ones(3), np.zeros((3, 2)), top_k=0)


def test_locate_ranks_segments():
    head = make_head()
    out = head.locate(torch.randn(12, D, dtype=torch.float64), torch.randn(D, dtype=torch.float64), top_k=3)
    scores = [s.score for s in out.segments]
    assert 1 <= len(scores) <= 3
    assert scores == sorted(scores, reverse=True)
    assert out.top == out.segments[0]
    np.testing.assert_array_equal(out.saliency, out.probs)


# =============================================================================
# Saliency
# =============================================================================

def test_constant_saliency():
    np.testing.assert_array_equal(saliency(np.full(6, 0.3)), np.full(6, 0.3))


def test_clip_pooling_over_150_seconds():
    pooled = pool_clip_saliency(np.arange(100, dtype=float), duration=150.0)
    assert pooled.shape == (75,)
    assert pooled[0] == pytest.approx(0.5)
    assert pooled[-1] == pytest.approx(98.5)


def test_empty_clip_takes_nearest_frame():
    pooled = pool_clip_saliency(np.array([1.0, 2.0, 3.0, 4.0, 5.0]), duration=30.0)
    assert pooled.shape == (15,)
    assert pooled[0] == 1.0
    assert pooled[1] == 1.0
    assert pooled[3] == 2.0
