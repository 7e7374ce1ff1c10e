# vexpert - Binary tensor container
# Copyright (C) 2026 Free & Fair

"""
A single-file container: one JSON header line, then raw little-endian
float32 arrays back to back.

The header names every array with its shape::

    {"format": "vexpert", "version": 1, "dtype": "float32",
     "byte_order": "little", "arrays": [{"name": "cls", "shape": [n, d]}, ...],
     ...extra metadata...}

Feature files, S-token files and checkpoint tensors all use this layout.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import FeatureFormatError

FORMAT = "vexpert"
VERSION = 1
_DTYPE = np.dtype("<f4")


def write_container(path: Path | str, arrays: dict[str, np.ndarray], meta: dict[str, Any] | None = None) -> None:
    """Write named arrays in insertion order."""
    header: dict[str, Any] = dict(meta or {})
    header.update({
        "format": FORMAT,
        "version": VERSION,
        "dtype": "float32",
        "byte_order": "little",
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in arrays.items()],
    })
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype=_DTYPE).tobytes())


def read_container(path: Path | str) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    """
    Read a container written by write_container.

    Returns (header, arrays). Arrays come back as native float32.
    """
    path = Path(path)
    if not path.exists():
        raise FeatureFormatError(f"no such file: {path}")
    raw = path.read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise FeatureFormatError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FeatureFormatError(f"{path}: unreadable header ({exc})") from exc
    if header.get("format") != FORMAT:
        raise FeatureFormatError(f"{path}: not a {FORMAT} container")
    if header.get("dtype") != "float32" or header.get("byte_order") != "little":
        raise FeatureFormatError(f"{path}: unsupported dtype/byte_order")

    arrays: dict[str, np.ndarray] = {}
    offset = newline + 1
    for spec in header.get("arrays", []):
        shape = tuple(int(s) for s in spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * _DTYPE.itemsize
        if offset + nbytes > len(raw):
            raise FeatureFormatError(f"{path}: truncated payload in array {spec['name']!r}")
        arr = np.frombuffer(raw, dtype=_DTYPE, count=count, offset=offset).reshape(shape)
        arrays[spec["name"]] = arr.astype(np.float32)
        offset += nbytes
    if offset != len(raw):
        raise FeatureFormatError(f"{path}: {len(raw) - offset} trailing bytes after payload")
    return header, arrays
