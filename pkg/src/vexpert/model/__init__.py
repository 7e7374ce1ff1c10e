# vexpert model module

from .adapters import DualLoraLinear, LowRankDelta
from .backbone import ExpertBackbone, GenerationResult, TokenBatch, TokenStream
from .checkpoint import load_checkpoint, save_checkpoint
from .expert import BatchOutput, Prediction, VideoExpert, VisualTokens
from .head import LocOutput, TemporalHead, decode_segments, pool_clip_saliency, saliency
from .tokenizer import Tokenizer, Vocab

__all__ = [
    "DualLoraLinear",
    "LowRankDelta",
    "ExpertBackbone",
    "GenerationResult",
    "TokenBatch",
    "TokenStream",
    "load_checkpoint",
    "save_checkpoint",
    "BatchOutput",
    "Prediction",
    "VideoExpert",
    "VisualTokens",
    "LocOutput",
    "TemporalHead",
    "decode_segments",
    "pool_clip_saliency",
    "saliency",
    "Tokenizer",
    "Vocab",
]
