# vexpert - Feature frontend
# Copyright (C) 2026 Free & Fair

"""
Toy stand-in for the frozen visual encoder.

encode_synthetic turns a SyntheticVideoSpec into a FrameFeatureSet with a
known signal:

    patches[t, j] = e_background + texture_j (+ e_class on the event block) + noise
    attn[t]       = softmax(patches[t] @ mean_j(patches[t]) / ATTN_TEMPERATURE)
    cls[t]        = R @ (attn[t] @ patches[t])

e_c is the c-th standard basis vector, texture_j a fixed small vector per
patch position and R a fixed orthogonal matrix that depends on feat_dim
only. Real encoders plug in through load_features.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..schema.features import FrameFeatureSet
from ..schema.types import SyntheticVideoSpec

logger = logging.getLogger(__name__)

ATTN_TEMPERATURE = 0.1
TEXTURE_SCALE = 0.1
_TEXTURE_SEED = 1009
_PROJECTION_SEED = 2003


def class_signature(class_id: int, feat_dim: int) -> np.ndarray:
    """Unit basis vector for a class."""
    sig = np.zeros(feat_dim, dtype=np.float64)
    sig[class_id] = 1.0
    return sig


@lru_cache(maxsize=32)
def fixed_projection(feat_dim: int) -> np.ndarray:
    """The encoder's orthogonal output projection R (read-only)."""
    rng = np.random.default_rng([_PROJECTION_SEED, feat_dim])
    q, r = np.linalg.qr(rng.normal(size=(feat_dim, feat_dim)))
    # Sign-fix so the factorisation is unique.
    q = q * np.sign(np.diag(r))
    q.setflags(write=False)
    return q


@lru_cache(maxsize=32)
def patch_texture(p: int, feat_dim: int) -> np.ndarray:
    """Fixed per-position texture vectors [p x feat_dim] (read-only)."""
    rng = np.random.default_rng([_TEXTURE_SEED, p, feat_dim])
    tex = rng.normal(scale=TEXTURE_SCALE, size=(p, feat_dim))
    tex.setflags(write=False)
    return tex


def event_block(class_id: int, p: int) -> np.ndarray:
    """Contiguous patch indices that carry the class signature."""
    size = max(1, p // 4)
    start = (class_id * size) % (p - size + 1)
    return np.arange(start, start + size)


def cls_attention(patches: np.ndarray) -> np.ndarray:
    """Softmax of patch similarity to the frame mean, per frame: [n x p]."""
    query = patches.mean(axis=1, keepdims=True)
    logits = np.einsum("npd,nqd->np", patches, query) / ATTN_TEMPERATURE
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=1, keepdims=True)


def pool_cls(patches: np.ndarray, attn: np.ndarray) -> np.ndarray:
    """The closed form cls = R @ (attn @ patches), evaluated in float64."""
    pooled = np.einsum("np,npd->nd", attn.astype(np.float64), patches.astype(np.float64))
    return pooled @ fixed_projection(patches.shape[2]).T


def frame_classes(spec: SyntheticVideoSpec) -> np.ndarray:
    """Event class per frame (-1 for background); rejects conflicting overlaps."""
    labels = np.full(spec.n_frames, -1, dtype=np.int64)
    frames = np.arange(spec.n_frames)
    for ev in spec.events:
        inside = (frames >= ev.segment.start) & (frames <= ev.segment.end)
        clash = inside & (labels >= 0) & (labels != ev.class_id)
        if clash.any():
            t = int(np.flatnonzero(clash)[0])
            raise DataError(
                f"overlapping events with conflicting classes at frame {t}: "
                f"{int(labels[t])} vs {ev.class_id}"
            )
        labels[inside] = ev.class_id
    return labels


def encode_synthetic(spec: SyntheticVideoSpec) -> FrameFeatureSet:
    """
    Encode a synthetic video. Pure function of the spec (seed included).
    """
    n, p, d = spec.n_frames, spec.patches_per_frame, spec.feat_dim
    labels = frame_classes(spec)

    patches = np.empty((n, p, d), dtype=np.float64)
    patches[:] = class_signature(spec.background_class, d) + patch_texture(p, d)
    for t in np.flatnonzero(labels >= 0):
        c = int(labels[t])
        patches[t, event_block(c, p)] += class_signature(c, d)

    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        patches += rng.normal(scale=spec.noise_sigma, size=patches.shape)

    patches32 = patches.astype(np.float32)
    attn = cls_attention(patches32.astype(np.float64))
    cls = pool_cls(patches32, attn)
    logger.debug("encoded synthetic video n=%d p=%d events=%d", n, p, len(spec.events))
    return FrameFeatureSet(cls=cls.astype(np.float32), patches=patches32, attn=attn.astype(np.float32))


def save_features(features: FrameFeatureSet, path: Path | str) -> None:
    features.save(path)


def load_features(path: Path | str) -> FrameFeatureSet:
    return FrameFeatureSet.load(path)


def resample_uniform(features: FrameFeatureSet, n: int) -> FrameFeatureSet:
    """Pick n frames uniformly (nearest index) from a longer or shorter video."""
    if n < 1:
        raise DataError("cannot resample to fewer than one frame")
    if n == features.n:
        return features
    idx = np.round(np.linspace(0, features.n - 1, n)).astype(np.int64)
    return FrameFeatureSet(cls=features.cls[idx], patches=features.patches[idx], attn=features.attn[idx])
