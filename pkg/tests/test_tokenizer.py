"""Tests for the toy tokenizer and its <LOC> extension."""

import pytest

from vexpert.errors import ModelError
from vexpert.model.tokenizer import Tokenizer


@pytest.fixture
def tok():
    return Tokenizer.build(["During <LOC>.", "person opens a door", "During which frames person opens a door happened?"])


def test_loc_sits_past_the_base_vocabulary(tok):
    assert tok.loc_id == tok.vocab.base_size
    assert len(tok) == tok.vocab.base_size + 1
    assert tok.encode("<LOC>") == [tok.loc_id]


def test_round_trip(tok):
    text = "During <LOC>."
    assert tok.decode(tok.encode(text)) == text


def test_unknown_words_fall_back_to_bytes(tok):
    ids = tok.encode("person zebra")
    assert len(ids) == 1 + len("zebra")
    assert tok.decode(ids) == "person zebra"


def test_specials_are_skipped(tok):
    ids = [tok.bos_id] + tok.encode("a door") + [tok.eos_id]
    assert tok.decode(ids) == "a door"
    assert tok.decode(ids, skip_special=False) == "<bos> a door <eos>"


def test_save_load_keeps_ids(tok, tmp_path):
    tok.save(tmp_path / "vocab.json")
    again = Tokenizer.load(tmp_path / "vocab.json")
    text = "During which frames person opens a door happened?"
    assert again.encode(text) == tok.encode(text)
    assert again.loc_id == tok.loc_id


def test_out_of_range_id(tok):
    with pytest.raises(ModelError):
        tok.decode([len(tok) + 5])
