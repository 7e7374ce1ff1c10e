# vexpert - VideoExpert composition
# Copyright (C) 2026 Free & Fair

"""
VideoExpert ties the pieces together:

    features -> (T-tokens, S-tokens) -> g_phi -> [X_T, X_S, prompt, target]
             -> ExpertBackbone -> <LOC> hidden states -> TemporalHead

It owns the tokenizer and the RunConfig, builds input streams, runs
teacher-forced batches for training and greedy generation for inference.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import torch
from torch import nn

from ..errors import DataError, ModelError
from ..schema.features import FrameFeatureSet
from ..schema.types import GroundingMode, Role, RunConfig, Segment, ROLE_CODES
from ..training.templates import parse_timestamps
from ..video.compress import CompressTrace, compress
from .backbone import ExpertBackbone, TokenBatch, TokenStream
from .head import LocOutput, TemporalHead
from .tokenizer import Tokenizer

logger = logging.getLogger(__name__)

IGNORE = -100

Grounder = Callable[[FrameFeatureSet, str], Segment]


@dataclass
class VisualTokens:
    t_tokens: np.ndarray  # [n x feat_dim]
    s_tokens: np.ndarray  # [m x feat_dim]
    trace: CompressTrace


@dataclass
class BatchOutput:
    """Teacher-forced pass over a batch of (visual, prompt, target) samples."""

    logits: torch.Tensor          # [B x L x V]
    hidden: torch.Tensor          # [B x L x d]
    labels: torch.Tensor          # [B x L], next-token ids, IGNORE outside targets
    t_hidden: list[torch.Tensor]  # per sample, [n x d]
    loc_hidden: list[list[torch.Tensor]]  # per sample, one d-vector per target <LOC>
    loc_positions: list[list[int]]


@dataclass
class Prediction:
    text: str
    token_ids: list[int]
    locs: list[LocOutput] = field(default_factory=list)
    segments: list[list[Segment]] = field(default_factory=list)  # per <LOC> (or per timestamp pair)
    truncated: bool = False

    @property
    def top_segments(self) -> list[Segment]:
        """Best segment of every <LOC>, in emission order."""
        return [ranked[0] for ranked in self.segments if ranked]


class VideoExpert(nn.Module):
    """
    Example:
        expert = VideoExpert(RunConfig(), tokenizer)
        visual = expert.visual_tokens(features)
        pred = expert.ground(visual, "During which frames person opens a door happened?")
        pred.top_segments  # [Segment(12, 37, score=0.93)]
    """

    def __init__(self, config: RunConfig, tokenizer: Tokenizer):
        super().__init__()
        self.config = config
        self.tokenizer = tokenizer
        self.backbone = ExpertBackbone(config.backbone, tokenizer.vocab.base_size)
        self.head: Optional[TemporalHead] = None
        if config.grounding == GroundingMode.LOC_HEAD:
            self.head = TemporalHead(config.head, config.backbone.d_model)

    @property
    def dtype(self) -> torch.dtype:
        return self.backbone.projector.weight.dtype

    def optimizer_parameters(self) -> list[nn.Parameter]:
        """Exactly the parameters training is allowed to update."""
        params = [p for p in self.backbone.parameters() if p.requires_grad]
        if self.head is not None:
            params.extend(self.head.parameters())
        return params

    # -------------------------------------------------------------------------
    # Inputs
    # -------------------------------------------------------------------------

    def visual_tokens(self, features: FrameFeatureSet) -> VisualTokens:
        s_tokens, trace = compress(features, self.config.compress)
        return VisualTokens(t_tokens=features.cls, s_tokens=s_tokens, trace=trace)

    def prompt_ids(self, prompt: str) -> list[int]:
        ids = [self.tokenizer.bos_id] + self.tokenizer.encode(prompt)
        limit = self.config.max_prompt_tokens
        if len(ids) > limit:
            logger.warning("prompt of %d tokens truncated to %d", len(ids), limit)
            ids = ids[:limit]
        return ids

    def target_ids(self, target: str) -> list[int]:
        ids = self.tokenizer.encode(target) + [self.tokenizer.eos_id]
        if len(ids) > self.config.max_target_tokens:
            raise DataError(
                f"target of {len(ids)} tokens exceeds max_target_tokens={self.config.max_target_tokens}"
            )
        return ids

    def build_stream(self, visual: VisualTokens, ids: Sequence[int]) -> TokenStream:
        """[X_T, X_S, text ids] with role tags."""
        t = torch.as_tensor(visual.t_tokens, dtype=self.dtype)
        s = torch.as_tensor(visual.s_tokens, dtype=self.dtype)
        x_visual = self.backbone.project_visual(t, s)
        id_tensor = torch.as_tensor(list(ids), dtype=torch.long)
        x_text = self.backbone.embed_tokens(id_tensor)
        roles = torch.cat([
            torch.full((t.shape[0],), ROLE_CODES[Role.T], dtype=torch.long),
            torch.full((s.shape[0],), ROLE_CODES[Role.S], dtype=torch.long),
            torch.where(
                id_tensor == self.backbone.loc_id,
                torch.tensor(ROLE_CODES[Role.LOC]),
                torch.tensor(ROLE_CODES[Role.TEXT]),
            ),
        ])
        return TokenStream(torch.cat([x_visual, x_text], dim=0), roles)

    # -------------------------------------------------------------------------
    # Training pass
    # -------------------------------------------------------------------------

    def forward_batch(self, samples: Sequence[tuple[VisualTokens, str, str]]) -> BatchOutput:
        """
        Teacher-forced pass. Each sample is (visual, prompt, target text);
        <LOC> hidden states are read at the target's own <LOC> positions.
        """
        streams: list[TokenStream] = []
        labels_rows: list[torch.Tensor] = []
        loc_positions: list[list[int]] = []
        n_ts: list[int] = []
        for visual, prompt, target in samples:
            p_ids, t_ids = self.prompt_ids(prompt), self.target_ids(target)
            stream = self.build_stream(visual, p_ids + t_ids)
            offset = len(stream) - len(t_ids)
            labels = torch.full((len(stream),), IGNORE, dtype=torch.long)
            labels[offset - 1 : len(stream) - 1] = torch.as_tensor(t_ids)
            streams.append(stream)
            labels_rows.append(labels)
            loc_positions.append([offset + i for i, t in enumerate(t_ids) if t == self.backbone.loc_id])
            n_ts.append(int(visual.t_tokens.shape[0]))

        batch = TokenBatch.collate(streams)
        hidden, logits = self.backbone(batch)
        longest = hidden.shape[1]
        labels = torch.full((len(streams), longest), IGNORE, dtype=torch.long)
        for b, row in enumerate(labels_rows):
            labels[b, : row.shape[0]] = row
        return BatchOutput(
            logits=logits,
            hidden=hidden,
            labels=labels,
            t_hidden=[hidden[b, : n_ts[b]] for b in range(len(streams))],
            loc_hidden=[[hidden[b, pos] for pos in loc_positions[b]] for b in range(len(streams))],
            loc_positions=loc_positions,
        )

    # -------------------------------------------------------------------------
    # Inference
    # -------------------------------------------------------------------------

    @torch.no_grad()
    def ground(self, visual: VisualTokens, prompt: str, top_k: Optional[int] = None,
               forced_target: Optional[str] = None) -> Prediction:
        """Greedy response plus decoded segments for every emitted <LOC>."""
        n = int(visual.t_tokens.shape[0])
        stream = self.build_stream(visual, self.prompt_ids(prompt))
        forced = self.target_ids(forced_target) if forced_target is not None else None
        result = self.backbone.generate(
            stream, self.tokenizer.eos_id, max_len=self.config.max_response_tokens, forced=forced,
        )
        text = self.tokenizer.decode(result.token_ids)
        pred = Prediction(text=text, token_ids=result.token_ids, truncated=result.truncated)

        if self.head is None:
            pred.segments = [[seg] for seg in parse_timestamps(text, n)]
            return pred
        k = top_k or self.config.top_k
        for h in result.loc_hidden:
            out = self.head.locate(result.t_hidden, h, top_k=k, nms_iou=self.config.nms_iou)
            pred.locs.append(out)
            pred.segments.append(out.segments)
        return pred

    def as_grounder(self) -> Grounder:
        """
        features, prompt -> top-1 segment of the first <LOC>.

        A response without any grounding falls back to the whole video with
        score 0.
        """

        def grounder(features: FrameFeatureSet, prompt: str) -> Segment:
            pred = self.ground(self.visual_tokens(features), prompt)
            top = pred.top_segments
            if top:
                return top[0]
            return Segment(start=0.0, end=float(features.n - 1), score=0.0)

        return grounder

    def check_compatible(self, features: FrameFeatureSet) -> None:
        if features.feat_dim != self.config.backbone.feat_dim:
            raise ModelError(
                f"features have width {features.feat_dim}, model expects {self.config.backbone.feat_dim}"
            )
