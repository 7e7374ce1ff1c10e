# vexpert - Exception hierarchy
# Copyright (C) 2026 Free & Fair

"""
Exceptions raised by vexpert.

Every exception carries a short ``category`` string. The CLI prints it as
``error: <category>: <message>`` so failures are machine-parseable.
"""

from __future__ import annotations


class VexpertError(Exception):
    """Base class for all vexpert failures."""

    category = "runtime"


class ConfigError(VexpertError):
    """Invalid configuration or invalid command-line usage."""

    category = "config"


class DataError(VexpertError):
    """A dataset, feature file or annotation could not be used."""

    category = "data"


class FeatureFormatError(DataError):
    """A feature container violates the FrameFeatureSet invariants."""


class AnnotationError(DataError):
    """
    A malformed annotation record.

    ``line`` is the 1-based line number, ``field`` the missing or bad field.
    """

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class CompressError(VexpertError):
    category = "compress"


class ModelError(VexpertError):
    category = "model"


class ObjectiveError(VexpertError):
    category = "objective"


class TrainingError(VexpertError):
    category = "train"


class EvalError(VexpertError):
    category = "eval"
