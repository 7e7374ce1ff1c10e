# vexpert - Temporal expert head
# Copyright (C) 2026 Free & Fair

"""
Lightweight temporal head.

    h_loc  = MLP(h)                            projected <LOC> hidden state
    x      = reweight(x_t, h_loc)              add | concat | self_atten
    probs  = sigmoid(conv_stack(x))            indicator branch, [n]
    offsets = softplus(conv_stack(x)) * scale  boundary branch, [n x 2]

Decoding turns every frame i into the candidate
[i - left_i, i + right_i] with score probs[i] and keeps the best after NMS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ConfigError, ModelError
from ..schema.intervals import iou_1d
from ..schema.types import HeadConfig, InteractionMode, Segment

CLIP_SECONDS = 2.0

_ACTIVATIONS = {"gelu": nn.GELU, "relu": nn.ReLU, "identity": nn.Identity}


@dataclass
class LocOutput:
    """Decoded output for one <LOC>."""

    probs: np.ndarray     # [n], in [0, 1]
    offsets: np.ndarray   # [n x 2], >= 0, frame units
    segments: list[Segment] = field(default_factory=list)  # score-descending
    saliency: Optional[np.ndarray] = None

    @property
    def top(self) -> Segment:
        if not self.segments:
            raise ModelError("no decoded segments")
        return self.segments[0]


class Scale(nn.Module):
    """A learnable scalar multiplier."""

    def __init__(self, init_value: float = 1.0):
        super().__init__()
        self.scale = nn.Parameter(torch.tensor(init_value, dtype=torch.float32))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.scale


class ConvBranch(nn.Module):
    """conv_layers x (Conv1d(d, d, k) + ReLU), then Conv1d to out_channels."""

    def __init__(self, d: int, out_channels: int, n_layers: int, kernel_size: int):
        super().__init__()
        pad = kernel_size // 2
        self.convs = nn.ModuleList(nn.Conv1d(d, d, kernel_size, padding=pad) for _ in range(n_layers))
        self.out = nn.Conv1d(d, out_channels, kernel_size, padding=pad)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: [B x n x d] -> [B x n x out_channels]."""
        y = x.transpose(1, 2)
        for conv in self.convs:
            y = F.relu(conv(y))
        return self.out(y).transpose(1, 2)


class TemporalHead(nn.Module):
    """
    Example:
        head = TemporalHead(HeadConfig(), d=128)
        probs, offsets = head(t_hidden, loc_hidden)
        out = head.locate(t_hidden, loc_hidden, top_k=1)
    """

    def __init__(self, config: HeadConfig, d: int):
        super().__init__()
        self.config = config
        self.d = d
        act = _ACTIVATIONS[config.mlp_activation]
        self.loc_mlp = nn.Sequential(nn.Linear(d, d), act(), nn.Linear(d, d))

        self.concat_proj: Optional[nn.Linear] = None
        self.cross_attn: Optional[nn.MultiheadAttention] = None
        if config.mode == InteractionMode.CONCAT:
            self.concat_proj = nn.Linear(2 * d, d)
        elif config.mode == InteractionMode.SELF_ATTEN:
            if d % config.atten_heads:
                raise ConfigError(f"atten_heads {config.atten_heads} does not divide d={d}")
            self.cross_attn = nn.MultiheadAttention(d, config.atten_heads, batch_first=True)

        self.indicator_branch = ConvBranch(d, 1, config.conv_layers, config.kernel_size)
        self.boundary_branch = ConvBranch(d, 2, config.conv_layers, config.kernel_size)
        self.offset_scale = Scale(config.offset_scale)

    # -------------------------------------------------------------------------
    # Stages
    # -------------------------------------------------------------------------

    def project_loc(self, h: torch.Tensor) -> torch.Tensor:
        """[..., d] -> [..., d]; a zero vector when <LOC> is ablated."""
        h_loc = self.loc_mlp(h)
        if not self.config.use_loc:
            return torch.zeros_like(h_loc)
        return h_loc

    def reweight(self, x_t: torch.Tensor, h_loc: torch.Tensor, mode: Optional[str] = None) -> torch.Tensor:
        """
        x_t: [n x d] or [B x n x d]; h_loc: [d] or [B x d].
        """
        try:
            mode = InteractionMode(mode) if mode is not None else self.config.mode
        except ValueError:
            raise ModelError(f"unknown interaction mode {mode!r}") from None

        batched = x_t.dim() == 3
        x = x_t if batched else x_t.unsqueeze(0)
        h = (h_loc if batched else h_loc.unsqueeze(0)).unsqueeze(1)  # [B x 1 x d]
        if h.shape[-1] != x.shape[-1]:
            raise ModelError(f"h_loc width {h.shape[-1]} != T-token width {x.shape[-1]}")

        if mode == InteractionMode.ADD:
            y = x + h
        elif mode == InteractionMode.CONCAT:
            if self.concat_proj is None:
                raise ModelError("head was built without a concat projection")
            y = self.concat_proj(torch.cat([x, h.expand_as(x)], dim=-1))
        else:
            if self.cross_attn is None:
                raise ModelError("head was built without an attention layer")
            attended, _ = self.cross_attn(x + h, x, x, need_weights=False)
            y = x + attended
        return y if batched else y[0]

    def indicator(self, x: torch.Tensor) -> torch.Tensor:
        """[n x d] -> probs [n] (or batched)."""
        batched = x.dim() == 3
        out = torch.sigmoid(self.indicator_branch(x if batched else x.unsqueeze(0))).squeeze(-1)
        return out if batched else out[0]

    def boundary(self, x: torch.Tensor) -> torch.Tensor:
        """[n x d] -> non-negative offsets [n x 2] in frames (left, right)."""
        batched = x.dim() == 3
        raw = self.boundary_branch(x if batched else x.unsqueeze(0))
        out = self.offset_scale(F.softplus(raw))
        return out if batched else out[0]

    def forward(self, x_t: torch.Tensor, h: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Raw (probs, offsets) for the <LOC> hidden state h."""
        x = self.reweight(x_t, self.project_loc(h))
        return self.indicator(x), self.boundary(x)

    @torch.no_grad()
    def locate(self, x_t: torch.Tensor, h: torch.Tensor, top_k: int = 1, nms_iou: float = 0.7) -> LocOutput:
        probs, offsets = self(x_t, h)
        p = probs.detach().double().cpu().numpy()
        o = offsets.detach().double().cpu().numpy()
        return LocOutput(
            probs=p,
            offsets=o,
            segments=decode_segments(p, o, top_k, nms_iou),
            saliency=saliency(p),
        )


# =============================================================================
# Post-processing
# =============================================================================

def candidate_segments(probs: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """[n x 3] rows of (start, end, score), clipped to [0, n-1]."""
    probs = np.asarray(probs, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.float64)
    n = probs.shape[0]
    if offsets.shape != (n, 2):
        raise ModelError(f"offsets shape {offsets.shape} does not match {n} frames")
    idx = np.arange(n, dtype=np.float64)
    start = np.clip(idx - offsets[:, 0], 0.0, n - 1)
    end = np.clip(idx + offsets[:, 1], 0.0, n - 1)
    return np.stack([start, np.maximum(start, end), probs], axis=1)


def decode_segments(probs: np.ndarray, offsets: np.ndarray, top_k: int, nms_iou: float = 0.7) -> list[Segment]:
    """
    Ranked segments after greedy NMS.

    Candidates are sorted by score (ties to the lower frame); a candidate is
    suppressed when its IoU with any kept segment is >= nms_iou.

    Example:
        probs = np.zeros(10); probs[5] = 1.0
        offsets = np.zeros((10, 2)); offsets[5] = (2, 3)
        decode_segments(probs, offsets, top_k=1)  # [Segment(3, 8, score=1)]
    """
    if top_k < 1:
        raise ModelError(f"top_k must be >= 1, got {top_k}")
    cands = candidate_segments(probs, offsets)
    order = np.lexsort((np.arange(cands.shape[0]), -cands[:, 2]))
    kept: list[np.ndarray] = []
    for i in order:
        cand = cands[i]
        if all(iou_1d(cand[:2], k[:2]) < nms_iou for k in kept):
            kept.append(cand)
            if len(kept) == top_k:
                break
    return [Segment(start=float(s), end=float(e), score=float(sc)) for s, e, sc in kept]


def saliency(probs: np.ndarray) -> np.ndarray:
    """Per-frame saliency: the indicator probabilities themselves."""
    return np.asarray(probs, dtype=np.float64).copy()


def pool_clip_saliency(sal: np.ndarray, duration: float, clip_seconds: float = CLIP_SECONDS) -> np.ndarray:
    """
    Mean-pool frame saliency into fixed-length clips.

    Frame i sits at i * duration / (n - 1) seconds; clip j covers
    [j * clip_seconds, (j + 1) * clip_seconds). Clips with no frame take
    the frame nearest to their centre.

    Example:
        pool_clip_saliency(np.ones(100), duration=150.0).shape  # (75,)
    """
    sal = np.asarray(sal, dtype=np.float64)
    n = sal.shape[0]
    if duration <= 0:
        raise ModelError(f"duration must be positive, got {duration}")
    clips = max(1, math.ceil(duration / clip_seconds))
    times = np.arange(n) * (duration / max(n - 1, 1))
    owner = np.minimum(np.floor(times / clip_seconds).astype(np.int64), clips - 1)
    sums = np.bincount(owner, weights=sal, minlength=clips)
    counts = np.bincount(owner, minlength=clips)
    pooled = np.empty(clips, dtype=np.float64)
    filled = counts > 0
    pooled[filled] = sums[filled] / counts[filled]
    for j in np.flatnonzero(~filled):
        centre = (j + 0.5) * clip_seconds
        pooled[j] = sal[int(np.argmin(np.abs(times - centre)))]
    return pooled
