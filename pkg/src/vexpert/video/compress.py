# vexpert - Spatial Compress
# Copyright (C) 2026 Free & Fair

"""
Compress patch tokens into S-tokens, codec style.

The video is cut into u groups of pictures (GOPs) around uniformly placed
IDR frames. Inside each GOP:

    (a) key tokens: top-k IDR patches by CLS attention, plus c context
        patches strided over the rest
    (b) every patch in the GOP joins the group of its most similar
        selected token (cosine)
    (c) a patch whose group label equals that of the same position one
        frame closer to the IDR is static and is dropped
    (d) surviving members of each group are averaged into one S-token

T-tokens (the per-frame class tokens) bypass this module untouched.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..errors import CompressError, ConfigError
from ..schema.features import FrameFeatureSet
from ..schema.types import CompressParams

logger = logging.getLogger(__name__)

REMOVED = -1
_EPS = 1e-12


# =============================================================================
# Types
# =============================================================================

class Gop(BaseModel):
    """
    A group of pictures: a contiguous frame run anchored on its IDR frame.

    ``labels`` is filled by assign_groups ([frames x p] group ids, frame 0
    is ``start``); ``pruned`` is the same array with static tokens set to -1.
    """

    index: int = Field(..., description="Position of this GOP in the video")
    idr: int = Field(..., description="IDR frame index")
    start: int = Field(..., description="First member frame")
    end: int = Field(..., description="Last member frame (inclusive)")
    key_ids: list[int] = Field(default_factory=list, description="IDR patch indices, descending attention")
    context_ids: list[int] = Field(default_factory=list, description="IDR patch indices, ascending")
    labels: Optional[np.ndarray] = None
    pruned: Optional[np.ndarray] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def members(self) -> range:
        return range(self.start, self.end + 1)

    @property
    def n_groups(self) -> int:
        return len(self.key_ids) + len(self.context_ids)

    def group_of(self, frame: int, patch: int) -> int:
        """Group id of a token (-1 once removed as static)."""
        table = self.pruned if self.pruned is not None else self.labels
        if table is None:
            raise CompressError(f"GOP {self.index} has no group assignment yet")
        return int(table[frame - self.start, patch])

    def __repr__(self) -> str:
        return f"Gop({self.index}, idr={self.idr}, frames={self.start}..{self.end})"


class GopTrace(BaseModel):
    idr: int
    start: int
    end: int
    tokens: int = Field(..., description="Patch tokens in the GOP")
    removed: int = Field(..., description="Tokens dropped as static")
    kept: int = Field(..., description="Tokens that entered merging")
    groups: int = Field(..., description="Non-empty groups = S-tokens emitted")
    key_ids: list[int] = Field(default_factory=list)
    context_ids: list[int] = Field(default_factory=list)
    group_sizes: list[int] = Field(default_factory=list, description="Surviving members per emitted S-token")


class CompressTrace(BaseModel):
    """Token accounting for one compressed video."""

    n: int = Field(..., description="Frames = T-tokens")
    p: int
    u: int
    w: int
    s_tokens: int = Field(..., description="m, S-tokens emitted")
    per_gop: list[GopTrace] = Field(default_factory=list)

    @property
    def t_tokens(self) -> int:
        return self.n

    @property
    def llm_visual_tokens(self) -> int:
        """n + m, what the LLM actually receives."""
        return self.n + self.s_tokens

    @property
    def budget(self) -> int:
        """n + u * w, the upper bound."""
        return self.n + self.u * self.w

    def summary(self) -> dict:
        data = self.model_dump()
        data.update(t_tokens=self.t_tokens, llm_visual_tokens=self.llm_visual_tokens, budget=self.budget)
        return data


# =============================================================================
# Steps
# =============================================================================

def _unit(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.float64)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / np.maximum(norm, _EPS)


def idr_frames(n: int, u: int) -> list[int]:
    """Uniformly placed IDR frames, one per GOP."""
    return [(2 * i + 1) * n // (2 * u) for i in range(u)]


def partition_gops(f: FrameFeatureSet, params: CompressParams) -> list[Gop]:
    """
    Split the video into exactly u contiguous GOPs.

    Every GOP grows one frame at a time from its IDR frame, left then right,
    GOPs taking turns in index order, while the next frame is unclaimed and
    cos(cls_idr, cls_frame) >= tau. Frames no GOP reached go to the
    nearest IDR frame (lower GOP on ties).
    """
    n, u = f.n, params.u
    if u > n:
        raise CompressError(f"cannot cut {n} frames into {u} GOPs")

    idrs = idr_frames(n, u)
    unit = _unit(f.cls)
    sim = np.clip(unit @ unit[idrs].T, -1.0, 1.0)  # [n x u]

    owner = np.full(n, -1, dtype=np.int64)
    owner[idrs] = np.arange(u)
    lo, hi = list(idrs), list(idrs)
    growing_left, growing_right = [True] * u, [True] * u
    while any(growing_left) or any(growing_right):
        for g in range(u):
            if growing_left[g]:
                t = lo[g] - 1
                if t >= 0 and owner[t] < 0 and sim[t, g] >= params.tau:
                    owner[t] = g
                    lo[g] = t
                else:
                    growing_left[g] = False
            if growing_right[g]:
                t = hi[g] + 1
                if t < n and owner[t] < 0 and sim[t, g] >= params.tau:
                    owner[t] = g
                    hi[g] = t
                else:
                    growing_right[g] = False

    idr_arr = np.asarray(idrs)
    for t in np.flatnonzero(owner < 0):
        owner[t] = int(np.argmin(np.abs(idr_arr - t)))

    gops = []
    for g in range(u):
        frames = np.flatnonzero(owner == g)
        start, end = int(frames[0]), int(frames[-1])
        if end - start + 1 != frames.size:
            raise CompressError(f"GOP {g} is not contiguous")
        gops.append(Gop(index=g, idr=idrs[g], start=start, end=end))
    return gops


def select_key_tokens(f: FrameFeatureSet, gop: Gop, params: CompressParams) -> tuple[list[int], list[int]]:
    """
    Top-k IDR patches by CLS attention (ties to the lower index) and c
    context patches uniformly strided over the remaining indices.
    """
    p = f.p
    if params.k + params.c > p:
        raise ConfigError(f"k + c = {params.k + params.c} exceeds {p} patches per frame")
    scores = f.attn[gop.idr].astype(np.float64)
    order = np.lexsort((np.arange(p), -scores))
    key_ids = order[: params.k]
    rest = np.setdiff1d(np.arange(p), key_ids)
    c = min(params.c, rest.size)
    context_ids = rest[(np.arange(c) * rest.size) // c] if c else rest[:0]
    return [int(i) for i in key_ids], [int(i) for i in context_ids]


def assign_groups(f: FrameFeatureSet, gop: Gop, key_ids: list[int], context_ids: list[int]) -> np.ndarray:
    """
    Label every (frame, patch) of the GOP with the group of its most similar
    selected token. Keys are groups 0..k-1, context tokens follow.
    """
    selected = list(key_ids) + list(context_ids)
    if not selected:
        raise CompressError(f"GOP {gop.index}: no selected tokens")
    anchors = _unit(f.patches[gop.idr, selected])            # [G x d]
    tokens = _unit(f.patches[gop.start : gop.end + 1])       # [F x p x d]
    sims = tokens @ anchors.T                                # [F x p x G]
    return sims.argmax(axis=-1).astype(np.int64)


def remove_static(gop: Gop, groups: np.ndarray) -> np.ndarray:
    """
    Drop temporally repeated tokens.

    Each position is compared with the same position one frame closer to
    the IDR frame; equal labels mark the farther token as removed (-1).
    IDR tokens are never removed.
    """
    pruned = groups.copy()
    rel_idr = gop.idr - gop.start
    for t in range(rel_idr + 1, groups.shape[0]):
        pruned[t, groups[t] == groups[t - 1]] = REMOVED
    for t in range(rel_idr - 1, -1, -1):
        pruned[t, groups[t] == groups[t + 1]] = REMOVED
    return pruned


def group_sizes(pruned: np.ndarray, n_groups: int) -> np.ndarray:
    labels = pruned[pruned >= 0]
    return np.bincount(labels, minlength=n_groups)


def merge_tokens(f: FrameFeatureSet, gop: Gop, pruned: np.ndarray) -> np.ndarray:
    """Mean of the surviving members of every non-empty group, by group id."""
    d = f.feat_dim
    vecs = f.patches[gop.start : gop.end + 1].reshape(-1, d).astype(np.float64)
    labels = pruned.reshape(-1)
    keep = labels >= 0
    n_groups = max(gop.n_groups, int(labels.max()) + 1 if keep.any() else 0)
    sums = np.zeros((n_groups, d), dtype=np.float64)
    np.add.at(sums, labels[keep], vecs[keep])
    counts = np.bincount(labels[keep], minlength=n_groups)
    nonempty = counts > 0
    return (sums[nonempty] / counts[nonempty, None]).astype(np.float32)


# =============================================================================
# Pipeline
# =============================================================================

def _compress_gop(f: FrameFeatureSet, gop: Gop, params: CompressParams) -> tuple[Gop, np.ndarray, GopTrace]:
    key_ids, context_ids = select_key_tokens(f, gop, params)
    gop = gop.model_copy(update={"key_ids": key_ids, "context_ids": context_ids})
    labels = assign_groups(f, gop, key_ids, context_ids)
    pruned = remove_static(gop, labels)
    gop = gop.model_copy(update={"labels": labels, "pruned": pruned})
    merged = merge_tokens(f, gop, pruned)
    sizes = group_sizes(pruned, gop.n_groups)
    removed = int((pruned == REMOVED).sum())
    trace = GopTrace(
        idr=gop.idr,
        start=gop.start,
        end=gop.end,
        tokens=int(pruned.size),
        removed=removed,
        kept=int(pruned.size) - removed,
        groups=int(merged.shape[0]),
        key_ids=key_ids,
        context_ids=context_ids,
        group_sizes=[int(s) for s in sizes[sizes > 0]],
    )
    return gop, merged, trace


def compress_gops(f: FrameFeatureSet, params: CompressParams) -> tuple[list[Gop], np.ndarray, CompressTrace]:
    """compress(), also returning the fully annotated GOPs."""
    params.check(f.n, f.p)
    gops = partition_gops(f, params)
    if params.workers > 1 and len(gops) > 1:
        with ThreadPoolExecutor(max_workers=params.workers) as pool:
            results = list(pool.map(lambda g: _compress_gop(f, g, params), gops))
    else:
        results = [_compress_gop(f, g, params) for g in gops]

    done = [r[0] for r in results]
    s_tokens = np.concatenate([r[1] for r in results], axis=0)
    trace = CompressTrace(
        n=f.n, p=f.p, u=params.u, w=params.w,
        s_tokens=int(s_tokens.shape[0]),
        per_gop=[r[2] for r in results],
    )
    logger.debug("compressed %d x %d patches into %d S-tokens", f.n, f.p, trace.s_tokens)
    return done, s_tokens, trace


def compress(f: FrameFeatureSet, params: CompressParams) -> tuple[np.ndarray, CompressTrace]:
    """
    Full Spatial Compress pipeline.

    Returns S-tokens [m x feat_dim] ordered by (GOP, group id) and the trace.
    m <= u * w always holds.
    """
    _, s_tokens, trace = compress_gops(f, params)
    return s_tokens, trace


def save_s_tokens(s_tokens: np.ndarray, path: Path | str) -> None:
    """Store S-tokens in the feature container with p = 1."""
    m = s_tokens.shape[0]
    FrameFeatureSet(
        cls=s_tokens,
        patches=s_tokens[:, None, :],
        attn=np.ones((m, 1), dtype=np.float32),
    ).save(path)
