# vexpert - Video temporal experts at desk scale
# Copyright (C) 2026 Free & Fair

"""
Video temporal experts on precomputed frame features.

The schema layer provides Pydantic models for videos, configs and
training records. Models, training and evaluation live in the
``model``, ``training`` and ``evaluation`` subpackages and pull in torch
on import; the top-level package stays light.
"""

from .errors import (
    VexpertError,
    ConfigError,
    DataError,
    FeatureFormatError,
    AnnotationError,
    CompressError,
    ModelError,
    ObjectiveError,
    TrainingError,
    EvalError,
)
from .schema import (
    # Video data
    FrameFeatureSet,
    Segment,
    SyntheticVideoSpec,
    # Configuration
    CompressParams,
    BackboneConfig,
    HeadConfig,
    LossWeights,
    RunConfig,
    # Records
    TrainExample,
    Task,
    EvalTask,
)

__all__ = [
    "VexpertError",
    "ConfigError",
    "DataError",
    "FeatureFormatError",
    "AnnotationError",
    "CompressError",
    "ModelError",
    "ObjectiveError",
    "TrainingError",
    "EvalError",
    "FrameFeatureSet",
    "Segment",
    "SyntheticVideoSpec",
    "CompressParams",
    "BackboneConfig",
    "HeadConfig",
    "LossWeights",
    "RunConfig",
    "TrainExample",
    "Task",
    "EvalTask",
]

__version__ = "0.1.0"
