# vexpert - Checkpoint directories
# Copyright (C) 2026 Free & Fair

"""
Checkpoint layout::

    <dir>/config.json          RunConfig
    <dir>/vocab.json           tokenizer words
    <dir>/tensors/<name>.bin   one container per named parameter or buffer
    <dir>/trainer_state.pt     optimizer/scheduler/step (training only)
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Optional

import numpy as np
import torch
from pydantic import ValidationError

from ..container import read_container, write_container
from ..errors import ConfigError, ModelError
from ..schema.types import RunConfig
from .expert import VideoExpert
from .tokenizer import Tokenizer

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.json"
VOCAB_FILE = "vocab.json"
TENSOR_DIR = "tensors"
TRAINER_STATE = "trainer_state.pt"


def save_checkpoint(expert: VideoExpert, path: Path | str, trainer_state: Optional[dict[str, Any]] = None) -> Path:
    path = Path(path)
    tensor_dir = path / TENSOR_DIR
    tensor_dir.mkdir(parents=True, exist_ok=True)
    (path / CONFIG_FILE).write_text(expert.config.model_dump_json(indent=2))
    expert.tokenizer.save(path / VOCAB_FILE)
    for name, tensor in expert.state_dict().items():
        array = tensor.detach().cpu().to(torch.float32).numpy()
        write_container(tensor_dir / f"{name}.bin", {name: array}, meta={"kind": "tensor"})
    if trainer_state is not None:
        torch.save(trainer_state, path / TRAINER_STATE)
    logger.info("saved checkpoint to %s", path)
    return path


def load_config(path: Path | str) -> RunConfig:
    cfg_file = Path(path) / CONFIG_FILE
    if not cfg_file.exists():
        raise ModelError(f"{path}: not a checkpoint directory (no {CONFIG_FILE})")
    try:
        return RunConfig.model_validate(json.loads(cfg_file.read_text()))
    except ValidationError as exc:
        raise ConfigError(f"{cfg_file}: {exc}") from exc


def load_checkpoint(path: Path | str) -> VideoExpert:
    """Rebuild a VideoExpert and restore every saved tensor."""
    path = Path(path)
    config = load_config(path)
    tokenizer = Tokenizer.load(path / VOCAB_FILE)
    expert = VideoExpert(config, tokenizer)
    state = expert.state_dict()
    restored: dict[str, torch.Tensor] = {}
    for name, current in state.items():
        tensor_file = path / TENSOR_DIR / f"{name}.bin"
        if not tensor_file.exists():
            raise ModelError(f"{path}: missing tensor {name!r}")
        _, arrays = read_container(tensor_file)
        array = arrays[name]
        if tuple(array.shape) != tuple(current.shape):
            raise ModelError(f"{name}: saved shape {array.shape} != model shape {tuple(current.shape)}")
        restored[name] = torch.from_numpy(np.array(array)).to(current.dtype)
    expert.load_state_dict(restored)
    return expert


def load_trainer_state(path: Path | str) -> Optional[dict[str, Any]]:
    state_file = Path(path) / TRAINER_STATE
    if not state_file.exists():
        return None
    return torch.load(state_file, weights_only=False)
