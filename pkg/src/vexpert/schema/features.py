# vexpert - Frame feature container
# Copyright (C) 2026 Free & Fair

"""
FrameFeatureSet holds what the frozen visual encoder produces for a video:
one class token per frame, the patch tokens of every frame, and the
CLS-to-patch attention scores that drive key token selection.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..container import read_container, write_container
from ..errors import FeatureFormatError

ATTN_TOLERANCE = 1e-6


class FrameFeatureSet(BaseModel):
    """
    Per-frame visual features.

    Arrays:
        cls:     [n x feat_dim]      class token per frame (T-token source)
        patches: [n x p x feat_dim]  patch tokens (S-token source)
        attn:    [n x p]             CLS attention over patches, rows sum to 1

    Example:
        f = FrameFeatureSet(cls=cls, patches=patches, attn=attn)
        f.save("video.feat")
        same = FrameFeatureSet.load("video.feat")
    """

    cls: np.ndarray = Field(..., description="Class tokens [n x feat_dim]")
    patches: np.ndarray = Field(..., description="Patch tokens [n x p x feat_dim]")
    attn: np.ndarray = Field(..., description="CLS attention [n x p]")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def _invariants(self) -> FrameFeatureSet:
        problem = check_invariants(self.cls, self.patches, self.attn)
        if problem:
            raise FeatureFormatError(problem)
        return self

    @property
    def n(self) -> int:
        return int(self.cls.shape[0])

    @property
    def p(self) -> int:
        return int(self.patches.shape[1])

    @property
    def feat_dim(self) -> int:
        return int(self.cls.shape[1])

    def save(self, path: Path | str) -> None:
        """Write the feature container (see vexpert.container)."""
        write_container(
            path,
            {"cls": self.cls, "patches": self.patches, "attn": self.attn},
            meta={"n": self.n, "p": self.p, "feat_dim": self.feat_dim, "kind": "features"},
        )

    @classmethod
    def load(cls, path: Path | str) -> FrameFeatureSet:
        """Read and validate a feature container."""
        header, arrays = read_container(path)
        for name in ("cls", "patches", "attn"):
            if name not in arrays:
                raise FeatureFormatError(f"{path}: missing {name} block")
        problem = check_invariants(arrays["cls"], arrays["patches"], arrays["attn"])
        if problem:
            raise FeatureFormatError(f"{path}: {problem}")
        observed = {"n": arrays["cls"].shape[0], "p": arrays["patches"].shape[1], "feat_dim": arrays["cls"].shape[1]}
        for key, value in observed.items():
            if key in header and int(header[key]) != int(value):
                raise FeatureFormatError(f"{path}: shape mismatch, header {key}={header[key]} but arrays give {value}")
        return cls(cls=arrays["cls"], patches=arrays["patches"], attn=arrays["attn"])

    def equals(self, other: FrameFeatureSet) -> bool:
        """Bitwise equality of all three arrays."""
        return (
            np.array_equal(self.cls, other.cls)
            and np.array_equal(self.patches, other.patches)
            and np.array_equal(self.attn, other.attn)
        )

    def __repr__(self) -> str:
        return f"FrameFeatureSet(n={self.n}, p={self.p}, feat_dim={self.feat_dim})"


def check_invariants(cls: np.ndarray, patches: np.ndarray, attn: np.ndarray) -> str | None:
    """Return a message naming the first violated invariant, or None."""
    if cls.ndim != 2:
        return f"shape mismatch: cls must be 2-D, got {cls.shape}"
    if patches.ndim != 3:
        return f"shape mismatch: patches must be 3-D, got {patches.shape}"
    if attn.ndim != 2:
        return f"shape mismatch: attn must be 2-D, got {attn.shape}"
    n, d = cls.shape
    if n < 1:
        return "shape mismatch: n must be >= 1"
    if patches.shape[0] != n or attn.shape[0] != n:
        return f"shape mismatch: frame counts cls={n}, patches={patches.shape[0]}, attn={attn.shape[0]}"
    if patches.shape[1] < 1:
        return "shape mismatch: p must be >= 1"
    if patches.shape[2] != d:
        return f"shape mismatch: feat_dim cls={d}, patches={patches.shape[2]}"
    if attn.shape[1] != patches.shape[1]:
        return f"shape mismatch: attn has {attn.shape[1]} columns for {patches.shape[1]} patches"
    if (attn < 0).any():
        return "attn not normalized: negative entries"
    sums = attn.astype(np.float64).sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ATTN_TOLERANCE)
    if bad.size:
        return f"attn not normalized: row {int(bad[0])} sums to {sums[bad[0]]:.6g}"
    return None
