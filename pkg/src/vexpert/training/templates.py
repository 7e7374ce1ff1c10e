# vexpert - Instruction templates
# Copyright (C) 2026 Free & Fair

"""
Prompt/target templates for the three task families.

Grounding answers never spell out timestamps: every event slot in a target
is a <LOC> token and the temporal head supplies the boundaries. The
text-timestamp ablation rewrites each <LOC> as "<start> to <end>" in
integer frames instead.
"""

from __future__ import annotations

import re
from typing import Any, Mapping, Sequence

import numpy as np

from ..errors import DataError
from ..schema.types import LOC_TOKEN, Segment, Task

TG_PROMPTS = [
    "During which frames {query} happened?",
    "Find the frames where {query}.",
    "When does {query} happen in the video?",
    "Localize the moment in which {query}.",
]
TG_TARGET = f"During {LOC_TOKEN}."

DVC_PROMPTS = [
    "Describe the events in the video. Each sentence should begin with the timestamps.",
    "List every event in the video, starting each sentence with when it happens.",
    "Caption each event of the video and say when it happens first.",
]
DVC_SENTENCE = f"During {LOC_TOKEN}, {{caption}}."

VQA_PROMPTS = [
    "{question} Options: {options}. Answer with one option.",
    "Question: {question} Choose from: {options}.",
    "{question} Pick the correct answer among {options}.",
]

_TIMESTAMP = re.compile(r"(\d+(?:\.\d+)?) to (\d+(?:\.\d+)?)")


def _pick(templates: Sequence[str], rng: np.random.Generator) -> str:
    return templates[int(rng.integers(len(templates)))]


def _require(fields: Mapping[str, Any], name: str, task: Task) -> Any:
    if name not in fields:
        raise DataError(f"{task.value} template needs field {name!r}")
    return fields[name]


def render_template(task: Task, fields: Mapping[str, Any], rng: np.random.Generator) -> tuple[str, str]:
    """
    Build (prompt, target) for one sample.

    Fields by task:
        TG:  query
        DVC: captions (one per event, in time order)
        VQA: question, choices, answer

    Example:
        render_template(Task.TG, {"query": "person opens a door"}, rng)
        # ("During which frames person opens a door happened?", "During <LOC>.")
    """
    if task == Task.TG:
        query = _require(fields, "query", task)
        return _pick(TG_PROMPTS, rng).format(query=query), TG_TARGET

    if task == Task.DVC:
        captions = list(_require(fields, "captions", task))
        if not captions:
            raise DataError("DVC template needs at least one caption")
        target = " ".join(DVC_SENTENCE.format(caption=c) for c in captions)
        return _pick(DVC_PROMPTS, rng), target

    question = _require(fields, "question", task)
    choices = list(_require(fields, "choices", task))
    answer = _require(fields, "answer", task)
    if choices and answer not in choices:
        raise DataError(f"answer {answer!r} is not among the choices")
    prompt = _pick(VQA_PROMPTS, rng).format(question=question, options=", ".join(choices))
    return prompt, str(answer)


def render_timestamps(target: str, segments: Sequence[Segment]) -> str:
    """Replace the i-th <LOC> with the i-th segment as integer frames."""
    parts = target.split(LOC_TOKEN)
    if len(parts) - 1 != len(segments):
        raise DataError(f"{len(parts) - 1} {LOC_TOKEN} slots for {len(segments)} segments")
    out = parts[0]
    for seg, rest in zip(segments, parts[1:]):
        out += f"{int(round(seg.start))} to {int(round(seg.end))}" + rest
    return out


def parse_timestamps(text: str, n: int) -> list[Segment]:
    """Read "<start> to <end>" pairs back from generated text, clipped to n frames."""
    segments = []
    for a, b in _TIMESTAMP.findall(text):
        s, e = sorted((float(a), float(b)))
        segments.append(Segment(start=s, end=e).clip(n))
    return segments


def timestamp_words(n: int) -> list[str]:
    """Vocabulary needed to write frame numbers 0..n-1 as text."""
    return [str(i) for i in range(n)] + ["to"]
