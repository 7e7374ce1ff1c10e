# vexpert - Toy text tokenizer
# Copyright (C) 2026 Free & Fair

"""
Whitespace/punctuation tokenizer with byte fallback and a <LOC> extension.

Ids are laid out as: special tokens, 256 byte tokens, words (sorted).
That range is the base vocabulary; <LOC> takes the first id after it.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterable

from pydantic import BaseModel, Field, model_validator

from ..errors import ModelError
from ..schema.types import LOC_TOKEN

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
SPECIALS = [PAD, BOS, EOS, UNK]
BYTE_TOKENS = [f"<0x{b:02X}>" for b in range(256)]

_PIECE = re.compile(r"<LOC>|[A-Za-z0-9_']+|[^\sA-Za-z0-9_']")
_NO_SPACE_BEFORE = set(".,?!:;)")
_BYTE = re.compile(r"^<0x([0-9A-F]{2})>$")


class Vocab(BaseModel):
    """Base vocabulary size and the id of <LOC> (just past the base range)."""

    base_size: int = Field(..., ge=1)
    loc_id: int = Field(...)

    @model_validator(mode="after")
    def _loc_outside_base(self) -> Vocab:
        if self.loc_id < self.base_size:
            raise ValueError("loc_id must lie outside the base vocabulary")
        return self

    @property
    def size(self) -> int:
        return self.loc_id + 1


class Tokenizer:
    """
    Example:
        tok = Tokenizer.build(["During <LOC>.", "person opens a door"])
        ids = tok.encode("During <LOC>.")
        tok.decode(ids)  # "During <LOC>."
    """

    def __init__(self, words: Iterable[str]):
        reserved = set(SPECIALS) | set(BYTE_TOKENS) | {LOC_TOKEN}
        self.words = sorted(set(words) - reserved)
        self.itos: list[str] = SPECIALS + BYTE_TOKENS + self.words
        self.stoi: dict[str, int] = {s: i for i, s in enumerate(self.itos)}
        self.vocab = Vocab(base_size=len(self.itos), loc_id=len(self.itos))

    @classmethod
    def build(cls, texts: Iterable[str], extra: Iterable[str] = ()) -> Tokenizer:
        words: set[str] = set(extra)
        for text in texts:
            words.update(_PIECE.findall(text))
        return cls(words)

    @property
    def pad_id(self) -> int:
        return self.stoi[PAD]

    @property
    def bos_id(self) -> int:
        return self.stoi[BOS]

    @property
    def eos_id(self) -> int:
        return self.stoi[EOS]

    @property
    def loc_id(self) -> int:
        return self.vocab.loc_id

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for piece in _PIECE.findall(text):
            if piece == LOC_TOKEN:
                ids.append(self.loc_id)
            elif piece in self.stoi:
                ids.append(self.stoi[piece])
            else:
                ids.extend(self.stoi[BYTE_TOKENS[b]] for b in piece.encode("utf-8"))
        return ids

    def token(self, i: int) -> str:
        if i == self.loc_id:
            return LOC_TOKEN
        if 0 <= i < len(self.itos):
            return self.itos[i]
        raise ModelError(f"token id {i} outside vocabulary of {self.vocab.size}")

    def decode(self, ids: Iterable[int], skip_special: bool = True) -> str:
        pieces: list[str] = []
        pending = bytearray()

        def flush() -> None:
            if pending:
                pieces.append(pending.decode("utf-8", errors="replace"))
                pending.clear()

        for i in ids:
            tok = self.token(int(i))
            byte = _BYTE.match(tok)
            if byte:
                pending.append(int(byte.group(1), 16))
                continue
            flush()
            if skip_special and tok in SPECIALS:
                continue
            pieces.append(tok)
        flush()

        out = ""
        for piece in pieces:
            if out and piece not in _NO_SPACE_BEFORE and not out.endswith("("):
                out += " "
            out += piece
        return out

    def save(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps({"loc_token": LOC_TOKEN, "words": self.words}, indent=1))

    @classmethod
    def load(cls, path: Path | str) -> Tokenizer:
        data = json.loads(Path(path).read_text())
        if data.get("loc_token") != LOC_TOKEN:
            raise ModelError(f"{path}: vocabulary was built for a different <LOC> token")
        return cls(data["words"])

    def __len__(self) -> int:
        return self.vocab.size
