# vexpert schema module

from .features import FrameFeatureSet
from .intervals import giou_1d, intersection, iop_1d, iou_1d, pairwise_iou
from .types import (
    # Enums
    Role,
    ROLE_CODES,
    Task,
    InteractionMode,
    GroundingMode,
    Perturbation,
    AnnotationFormat,
    EvalTask,
    # Core types
    Segment,
    EventPlacement,
    SyntheticVideoSpec,
    CompressParams,
    DualAdapterConfig,
    BackboneConfig,
    HeadConfig,
    LossWeights,
    SynthRanges,
    RunConfig,
    TrainExample,
    AnnotationRecord,
    LOC_TOKEN,
)

__all__ = [
    "FrameFeatureSet",
    "Role",
    "ROLE_CODES",
    "Task",
    "InteractionMode",
    "GroundingMode",
    "Perturbation",
    "AnnotationFormat",
    "EvalTask",
    "Segment",
    "EventPlacement",
    "SyntheticVideoSpec",
    "CompressParams",
    "DualAdapterConfig",
    "BackboneConfig",
    "HeadConfig",
    "LossWeights",
    "SynthRanges",
    "RunConfig",
    "TrainExample",
    "AnnotationRecord",
    "LOC_TOKEN",
    "intersection",
    "iou_1d",
    "iop_1d",
    "giou_1d",
    "pairwise_iou",
]
