# vexpert - Type definitions
# Copyright (C) 2026 Free & Fair

"""
Type definitions for video temporal experts.

This module provides the typed vocabulary shared by every stage:
- Segments (event intervals in frame units)
- Synthetic video descriptions
- Compression, adapter, backbone and head configuration
- Training examples and ingested annotation records
- The run configuration that ties them together
"""

from __future__ import annotations

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..errors import ConfigError, DataError
from .features import FrameFeatureSet

LOC_TOKEN = "<LOC>"


# =============================================================================
# Enumerations
# =============================================================================

class Role(str, Enum):
    """Role tag of a position in the LLM input stream."""
    T = "T"        # per-frame class token
    S = "S"        # compressed spatial token
    TEXT = "TEXT"  # prompt / response text
    LOC = "LOC"    # the <LOC> localization token


# Integer codes used inside tensors; order matches the stream layout.
ROLE_CODES: dict[Role, int] = {Role.T: 0, Role.S: 1, Role.TEXT: 2, Role.LOC: 3}


class Task(str, Enum):
    """Task family a training example belongs to."""
    TG = "TG"    # temporal grounding
    DVC = "DVC"  # dense video captioning
    VQA = "VQA"  # (multiple-choice) question answering


class InteractionMode(str, Enum):
    """How h_loc reweights the T-tokens in the temporal head."""
    ADD = "add"
    CONCAT = "concat"
    SELF_ATTEN = "self_atten"


class GroundingMode(str, Enum):
    """
    Where timestamps come from.

    LOC_HEAD emits <LOC> and decodes segments with the temporal head.
    TEXT_TIMESTAMPS writes frame numbers as text (no temporal head).
    """
    LOC_HEAD = "loc_head"
    TEXT_TIMESTAMPS = "text_timestamps"


class Perturbation(str, Enum):
    """Video perturbation applied by the bias diagnostic."""
    NONE = "none"
    SHUFFLE = "shuffle"
    BLANK = "blank"


class AnnotationFormat(str, Enum):
    CHARADES_STA = "charades_sta"
    QVHIGHLIGHTS = "qvhighlights"
    NEXTGQA = "nextgqa"


class EvalTask(str, Enum):
    TG = "tg"
    HD = "hd"
    DVC_LOC = "dvc_loc"
    GQA = "gqa"


# =============================================================================
# Segments and synthetic videos
# =============================================================================

class Segment(BaseModel):
    """
    An event interval in (fractional) frame units.

    Frame i is sampled at time i * duration / (n - 1), so seconds and
    frames convert with the same factor in both directions.

    Example:
        gt = Segment(start=12, end=37)
        pred = Segment(start=10.5, end=36.0, score=0.91)
    """

    start: float = Field(..., ge=0.0, description="First frame index (inclusive)")
    end: float = Field(..., ge=0.0, description="Last frame index (inclusive)")
    score: float = Field(default=1.0, description="Ranking score for predictions")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _ordered(self) -> Segment:
        if self.end < self.start:
            raise ValueError(f"segment end {self.end} < start {self.start}")
        return self

    @property
    def length(self) -> float:
        return self.end - self.start

    def clip(self, n: int) -> Segment:
        """Clip to [0, n-1]."""
        hi = float(n - 1)
        start = min(max(self.start, 0.0), hi)
        end = min(max(self.end, start), hi)
        return Segment(start=start, end=end, score=self.score)

    def within(self, n: int) -> bool:
        return 0.0 <= self.start <= self.end <= n - 1

    def to_seconds(self, duration: float, n: int) -> tuple[float, float]:
        scale = duration / max(n - 1, 1)
        return self.start * scale, self.end * scale

    @classmethod
    def from_seconds(cls, start_s: float, end_s: float, duration: float, n: int, rounded: bool = True) -> Segment:
        """
        Convert a seconds interval to frames: round(seconds / duration * (n - 1)).

        With rounded=False the fractional frame position is kept.
        """
        if duration <= 0:
            raise DataError(f"video duration must be positive, got {duration}")
        scale = (n - 1) / duration
        start, end = start_s * scale, end_s * scale
        if rounded:
            start, end = float(round(start)), float(round(end))
        return cls(start=start, end=max(start, end)).clip(n)

    def __repr__(self) -> str:
        return f"Segment({self.start:g}, {self.end:g}, score={self.score:g})"


class EventPlacement(BaseModel):
    """One event of a synthetic video: where it is and which class it shows."""

    segment: Segment = Field(..., description="Frames covered by the event")
    class_id: int = Field(..., ge=0, description="Event class; selects the signature vector")


class SyntheticVideoSpec(BaseModel):
    """
    Description of a toy video for the synthetic encoder.

    Example:
        SyntheticVideoSpec(n_frames=10, grid=(2, 2),
                           events=[EventPlacement(segment=Segment(start=3, end=6), class_id=1)],
                           seed=7)
    """

    n_frames: int = Field(..., ge=1, description="Number of frames")
    grid: tuple[int, int] = Field(default=(4, 4), description="Patch grid (rows, cols); p = rows * cols")
    events: list[EventPlacement] = Field(default_factory=list)
    background_class: int = Field(default=0, ge=0, description="Signature used outside events")
    noise_sigma: float = Field(default=0.0, ge=0.0, description="Gaussian noise added to patches")
    seed: int = Field(default=0, description="Noise seed")
    feat_dim: int = Field(default=64, ge=2, description="Feature width")

    @field_validator("grid")
    @classmethod
    def _positive_grid(cls, grid: tuple[int, int]) -> tuple[int, int]:
        if grid[0] < 1 or grid[1] < 1:
            raise ValueError(f"grid must be positive, got {grid}")
        return grid

    @model_validator(mode="after")
    def _events_inside(self) -> SyntheticVideoSpec:
        for ev in self.events:
            if not ev.segment.within(self.n_frames):
                raise ValueError(f"event {ev.segment!r} outside [0, {self.n_frames - 1}]")
            if ev.class_id >= self.feat_dim:
                raise ValueError(f"class_id {ev.class_id} needs feat_dim > {ev.class_id}")
        if self.background_class >= self.feat_dim:
            raise ValueError("background_class must be < feat_dim")
        return self

    @property
    def patches_per_frame(self) -> int:
        return self.grid[0] * self.grid[1]


# =============================================================================
# Model configuration
# =============================================================================

class CompressParams(BaseModel):
    """
    Spatial Compress settings. w = k + c S-tokens per GOP, at most u * w in total.
    """

    u: int = Field(default=4, ge=1, description="Number of GOPs (IDR frames)")
    k: int = Field(default=48, ge=1, description="Key tokens per IDR frame")
    c: int = Field(default=16, ge=0, description="Context tokens per IDR frame")
    tau: float = Field(default=0.8, ge=-1.0, le=1.0, description="Cosine cutoff for GOP boundary expansion")
    workers: int = Field(default=1, ge=1, description="Threads used to process GOPs")

    @property
    def w(self) -> int:
        return self.k + self.c

    def check(self, n: int, p: int) -> None:
        """Validate against a concrete video."""
        if self.u > n:
            raise ConfigError(f"u={self.u} GOPs requested for a {n}-frame video")
        if self.k + self.c > p:
            raise ConfigError(f"k + c = {self.k + self.c} exceeds {p} patches per frame")


class DualAdapterConfig(BaseModel):
    """
    Rank split between the temporal and spatial low-rank adapters.

    temporal_rank = round(total_rank * alpha_split), the rest is spatial.
    """

    total_rank: int = Field(default=64, ge=0)
    alpha_split: float = Field(default=0.5, ge=0.0, le=1.0, description="Share of rank given to the temporal expert")
    lora_alpha: float = Field(default=64.0, gt=0.0, description="Scaling numerator; delta = B A * lora_alpha / rank")
    targets: list[str] = Field(default_factory=lambda: ["q", "v"], description="Adapted projections: q, k, v, o, fc, proj")

    @field_validator("targets")
    @classmethod
    def _known_targets(cls, targets: list[str]) -> list[str]:
        unknown = set(targets) - {"q", "k", "v", "o", "fc", "proj"}
        if unknown:
            raise ValueError(f"unknown adapter targets {sorted(unknown)}")
        return targets

    @property
    def temporal_rank(self) -> int:
        return int(round(self.total_rank * self.alpha_split))

    @property
    def spatial_rank(self) -> int:
        return self.total_rank - self.temporal_rank


class BackboneConfig(BaseModel):
    """Desk-scale decoder-only backbone."""

    d_model: int = Field(default=128, ge=8)
    n_layers: int = Field(default=4, ge=1)
    n_heads: int = Field(default=4, ge=1)
    context: int = Field(default=1024, ge=8, description="Maximum stream length")
    mlp_ratio: int = Field(default=4, ge=1)
    feat_dim: int = Field(default=64, ge=1, description="Width of visual features fed to the projector")
    adapter: DualAdapterConfig = Field(default_factory=DualAdapterConfig)
    freeze_base: bool = Field(default=True, description="Keep W_o, embeddings and lm head frozen")
    train_projector: bool = Field(default=True, description="Train the vision-language projector g_phi")
    init_seed: int = Field(default=0, description="Seed for base weight initialisation")

    @model_validator(mode="after")
    def _heads_divide(self) -> BackboneConfig:
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        return self


class HeadConfig(BaseModel):
    """Temporal expert head."""

    mode: InteractionMode = Field(default=InteractionMode.ADD)
    conv_layers: int = Field(default=3, ge=1, description="Conv + ReLU layers per branch")
    kernel_size: int = Field(default=3, ge=1)
    offset_scale: float = Field(default=10.0, gt=0.0, description="Initial value of the learnable offset scale")
    mlp_activation: str = Field(default="gelu", description="'gelu', 'relu' or 'identity'")
    use_loc: bool = Field(default=True, description="False reweights with a zero h_loc")
    atten_heads: int = Field(default=4, ge=1)

    @field_validator("mlp_activation")
    @classmethod
    def _known_activation(cls, name: str) -> str:
        if name not in {"gelu", "relu", "identity"}:
            raise ValueError(f"unknown activation {name!r}")
        return name

    @field_validator("kernel_size")
    @classmethod
    def _odd_kernel(cls, k: int) -> int:
        if k % 2 == 0:
            raise ValueError("kernel_size must be odd for same-padding")
        return k


class LossWeights(BaseModel):
    text: float = Field(default=1.0, ge=0.0, description="lambda_text")
    l1: float = Field(default=1.0, ge=0.0, description="lambda_L1")
    iou: float = Field(default=1.0, ge=0.0, description="lambda_iou")


class SynthRanges(BaseModel):
    """Ranges for synthetic dataset generation."""

    n_frames: int = Field(default=100, ge=2)
    grid: tuple[int, int] = Field(default=(8, 8))
    feat_dim: int = Field(default=64, ge=2)
    n_classes: int = Field(default=8, ge=2)
    min_events: int = Field(default=1, ge=1)
    max_events: int = Field(default=3, ge=1)
    min_event_frames: int = Field(default=8, ge=1)
    max_event_frames: int = Field(default=40, ge=1)
    noise_sigma: float = Field(default=0.1, ge=0.0)
    task_mix: dict[Task, float] = Field(
        default_factory=lambda: {Task.TG: 1.0, Task.DVC: 1.0, Task.VQA: 1.0},
        description="Relative sampling weight per task family",
    )

    @model_validator(mode="after")
    def _consistent(self) -> SynthRanges:
        if self.max_events < self.min_events:
            raise ValueError("max_events < min_events")
        if self.max_event_frames < self.min_event_frames:
            raise ValueError("max_event_frames < min_event_frames")
        if self.max_events * self.min_event_frames > self.n_frames:
            raise ValueError("events cannot fit in n_frames")
        if self.n_classes < self.max_events:
            raise ValueError("need n_classes >= max_events so events in one video differ")
        if self.n_classes + 1 > self.feat_dim:
            raise ValueError("need feat_dim > n_classes (class 0 is background)")
        if not any(w > 0 for w in self.task_mix.values()):
            raise ValueError("task_mix has no positive weight")
        return self


class RunConfig(BaseModel):
    """
    Everything a training or evaluation run needs.

    The full-scale reference batch size is 128; the desk default is 8.
    """

    seed: int = Field(default=0)
    n_frames: int = Field(default=100, ge=1, description="Frames per video (synth.n_frames follows it)")
    batch_size: int = Field(default=8, ge=1)
    lr: float = Field(default=3e-4, gt=0.0)
    weight_decay: float = Field(default=0.01, ge=0.0)
    epochs: int = Field(default=5, ge=1)
    max_steps: Optional[int] = Field(default=None, ge=1, description="Stop after this many steps")
    warmup_frac: float = Field(default=0.05, ge=0.0, le=1.0)
    grad_clip: float = Field(default=1.0, gt=0.0)
    grounding: GroundingMode = Field(default=GroundingMode.LOC_HEAD)
    max_prompt_tokens: int = Field(default=48, ge=1)
    max_target_tokens: int = Field(default=64, ge=1)
    max_response_tokens: int = Field(default=512, ge=1)
    top_k: int = Field(default=1, ge=1, description="Segments decoded per <LOC> (10 for moment lists)")
    nms_iou: float = Field(default=0.7, gt=0.0, le=1.0)
    dataset: Optional[str] = Field(default=None, description="Path to a dataset JSON-lines file")
    compress: CompressParams = Field(default_factory=CompressParams)
    backbone: BackboneConfig = Field(default_factory=BackboneConfig)
    head: HeadConfig = Field(default_factory=HeadConfig)
    weights: LossWeights = Field(default_factory=LossWeights)
    synth: SynthRanges = Field(default_factory=SynthRanges)

    @model_validator(mode="after")
    def _fits_context(self) -> RunConfig:
        budget = (
            self.n_frames
            + self.compress.u * self.compress.w
            + self.max_prompt_tokens
            + self.max_target_tokens
        )
        if budget > self.backbone.context:
            raise ValueError(
                f"n + u*w + prompt + target = {budget} exceeds context {self.backbone.context}"
            )
        if self.synth.n_frames != self.n_frames:
            self.synth = self.synth.model_copy(update={"n_frames": self.n_frames})
        return self

    @property
    def visual_budget(self) -> int:
        """n + u * w: the most visual tokens the LLM can receive."""
        return self.n_frames + self.compress.u * self.compress.w


# =============================================================================
# Data records
# =============================================================================

class TrainExample(BaseModel):
    """
    One instruction-following sample.

    Features come from exactly one of: a synthetic video spec (re-encoded on
    demand), a feature file path, or an inline FrameFeatureSet.

    Example:
        TrainExample(id="synth-1-000003", task=Task.TG,
                     prompt="During which frames person opens a door happened?",
                     target="During <LOC>.",
                     gt_segments=[Segment(start=12, end=37)],
                     video=spec)
    """

    id: str = Field(..., description="Stable identifier; also drives the split")
    task: Task
    prompt: str
    target: str = Field(..., description="Response text; contains one <LOC> per ground-truth segment")
    gt_segments: list[Segment] = Field(default_factory=list, description="Ordered, one per <LOC>")
    query: str = Field(default="", description="The event text being grounded or asked about")
    answer: Optional[str] = Field(default=None, description="Correct answer for QA samples")
    choices: list[str] = Field(default_factory=list)
    evidence: list[Segment] = Field(default_factory=list, description="Grounding evidence for QA samples")
    event_classes: list[int] = Field(default_factory=list, description="Class ids aligned with gt_segments")
    clip_ids: list[int] = Field(default_factory=list, description="Relevant 2 s clip ids (highlight labels)")
    saliency: list[list[int]] = Field(default_factory=list, description="Per relevant clip, annotator scores 0-4")
    duration: float = Field(default=0.0, ge=0.0, description="Video length in seconds (0 = unknown)")
    split: str = Field(default="train")
    video: Optional[SyntheticVideoSpec] = None
    features_path: Optional[str] = None
    features: Optional[FrameFeatureSet] = Field(default=None, exclude=True)

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _loc_count(self) -> TrainExample:
        locs = self.target.count(LOC_TOKEN)
        if self.task == Task.VQA:
            if locs:
                raise ValueError(f"{self.id}: VQA target must not contain {LOC_TOKEN}")
        elif locs != len(self.gt_segments):
            raise ValueError(
                f"{self.id}: target has {locs} {LOC_TOKEN} but {len(self.gt_segments)} gt segments"
            )
        if self.video is None and self.features_path is None and self.features is None:
            raise ValueError(f"{self.id}: no feature source")
        return self

    @property
    def n_frames(self) -> int:
        if self.features is not None:
            return self.features.n
        if self.video is not None:
            return self.video.n_frames
        raise DataError(f"{self.id}: frame count unknown until features are loaded")

    def effective_duration(self) -> float:
        """Seconds; synthetic videos run at one frame per second."""
        if self.duration > 0:
            return self.duration
        return float(max(self.n_frames - 1, 1))


class AnnotationRecord(BaseModel):
    """
    Normalized metadata parsed from a public annotation file.

    Segments stay in seconds; features are supplied separately.
    """

    source: AnnotationFormat
    video_id: str
    qid: Optional[str] = None
    query: str = ""
    windows: list[tuple[float, float]] = Field(default_factory=list, description="Ground-truth windows in seconds")
    duration: Optional[float] = None
    clip_ids: list[int] = Field(default_factory=list, description="QVHighlights relevant 2 s clip ids")
    saliency: list[list[int]] = Field(default_factory=list, description="Per relevant clip, annotator scores 0-4")
    answer: Optional[str] = None
    choices: list[str] = Field(default_factory=list)
    line: int = Field(default=0, description="1-based source line")

    def segments(self, n: int, duration: Optional[float] = None) -> list[Segment]:
        """Windows converted to frame units for an n-frame sampling."""
        dur = duration if duration is not None else self.duration
        if dur is None:
            raise DataError(f"{self.video_id}: duration needed to convert seconds to frames")
        return [Segment.from_seconds(s, e, dur, n) for s, e in self.windows]
