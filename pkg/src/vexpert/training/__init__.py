# vexpert training module
# (Trainer: import vexpert.training.trainer directly.)

from .ingest import ingest_annotations, records_to_examples
from .objectives import (
    LossBundle,
    boundary_loss,
    fg_labels,
    giou_1d,
    indicator_loss,
    match_locs,
    text_loss,
    total_loss,
)
from .synth import load_dataset, oracle_locate, save_dataset, synth_dataset
from .templates import render_template

__all__ = [
    "ingest_annotations",
    "records_to_examples",
    "LossBundle",
    "boundary_loss",
    "fg_labels",
    "giou_1d",
    "indicator_loss",
    "match_locs",
    "text_loss",
    "total_loss",
    "load_dataset",
    "oracle_locate",
    "save_dataset",
    "synth_dataset",
    "render_template",
]
