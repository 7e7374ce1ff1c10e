# vexpert - Expert backbone
# Copyright (C) 2026 Free & Fair

"""
A small decoder-only transformer with frozen base weights.

Attention and MLP projections listed in DualAdapterConfig.targets are
wrapped in DualLoraLinear, so every adapted layer routes T rows to the
temporal expert and all other rows to the spatial expert. The vocabulary
is extended with one trainable <LOC> embedding, tied between input and
output.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ModelError
from ..schema.types import ROLE_CODES, BackboneConfig, Role
from .adapters import DualLoraLinear, routed

logger = logging.getLogger(__name__)

_EMBED_STD = 0.25
_POS_STD = 0.1
_WEIGHT_STD = 0.02

_ORDER = {ROLE_CODES[Role.T]: 0, ROLE_CODES[Role.S]: 1, ROLE_CODES[Role.TEXT]: 2, ROLE_CODES[Role.LOC]: 2}


# =============================================================================
# Streams
# =============================================================================

@dataclass
class TokenStream:
    """
    One LLM input: [T-tokens, S-tokens, text/LOC tokens] as embeddings.

    roles holds integer role codes (see ROLE_CODES).
    """

    embeddings: torch.Tensor  # [L x d]
    roles: torch.Tensor       # [L]

    def __post_init__(self) -> None:
        if self.embeddings.dim() != 2 or self.roles.dim() != 1:
            raise ModelError("TokenStream needs [L x d] embeddings and [L] roles")
        if self.embeddings.shape[0] != self.roles.shape[0]:
            raise ModelError(
                f"roles length {self.roles.shape[0]} != embeddings rows {self.embeddings.shape[0]}"
            )
        ranks = [_ORDER[int(r)] for r in self.roles.tolist()]
        if any(b < a for a, b in zip(ranks, ranks[1:])):
            raise ModelError("stream must be T-tokens, then S-tokens, then text")

    @property
    def d(self) -> int:
        return int(self.embeddings.shape[1])

    def __len__(self) -> int:
        return int(self.embeddings.shape[0])

    def count(self, role: Role) -> int:
        return int((self.roles == ROLE_CODES[role]).sum())

    def extend(self, embedding: torch.Tensor, role: Role) -> TokenStream:
        return TokenStream(
            torch.cat([self.embeddings, embedding.reshape(1, -1)], dim=0),
            torch.cat([self.roles, self.roles.new_tensor([ROLE_CODES[role]])]),
        )


@dataclass
class TokenBatch:
    """Right-padded streams. Padding sits after every real token, so causal
    attention never lets a real position see it."""

    embeddings: torch.Tensor  # [B x L x d]
    roles: torch.Tensor       # [B x L]
    lengths: list[int] = field(default_factory=list)

    @classmethod
    def collate(cls, streams: Sequence[TokenStream]) -> TokenBatch:
        if not streams:
            raise ModelError("cannot collate an empty batch")
        longest = max(len(s) for s in streams)
        d = streams[0].d
        ref = streams[0].embeddings
        emb = ref.new_zeros(len(streams), longest, d)
        roles = torch.full((len(streams), longest), ROLE_CODES[Role.TEXT], dtype=torch.long)
        for b, s in enumerate(streams):
            emb[b, : len(s)] = s.embeddings
            roles[b, : len(s)] = s.roles
        return cls(emb, roles, [len(s) for s in streams])


@dataclass
class GenerationResult:
    token_ids: list[int]
    loc_hidden: list[torch.Tensor]
    t_hidden: torch.Tensor  # final-layer hidden states of the T-token prefix
    truncated: bool = False


# =============================================================================
# Transformer
# =============================================================================

def _maybe_adapt(layer: nn.Linear, name: str, config: BackboneConfig) -> nn.Module:
    if name not in config.adapter.targets:
        return layer
    return DualLoraLinear(
        layer,
        config.adapter.temporal_rank,
        config.adapter.spatial_rank,
        config.adapter.lora_alpha,
    )


class CausalSelfAttention(nn.Module):
    def __init__(self, config: BackboneConfig):
        super().__init__()
        d = config.d_model
        self.n_heads = config.n_heads
        self.q = _maybe_adapt(nn.Linear(d, d), "q", config)
        self.k = _maybe_adapt(nn.Linear(d, d), "k", config)
        self.v = _maybe_adapt(nn.Linear(d, d), "v", config)
        self.o = _maybe_adapt(nn.Linear(d, d), "o", config)

    def forward(self, x: torch.Tensor, roles: torch.Tensor) -> torch.Tensor:
        B, L, d = x.shape
        h = self.n_heads

        def heads(t: torch.Tensor) -> torch.Tensor:
            return t.view(B, L, h, d // h).transpose(1, 2)

        q = heads(routed(self.q, x, roles))
        k = heads(routed(self.k, x, roles))
        v = heads(routed(self.v, x, roles))
        y = F.scaled_dot_product_attention(q, k, v, is_causal=True)
        y = y.transpose(1, 2).contiguous().view(B, L, d)
        return routed(self.o, y, roles)


class MLP(nn.Module):
    def __init__(self, config: BackboneConfig):
        super().__init__()
        d = config.d_model
        self.fc = _maybe_adapt(nn.Linear(d, config.mlp_ratio * d), "fc", config)
        self.proj = _maybe_adapt(nn.Linear(config.mlp_ratio * d, d), "proj", config)

    def forward(self, x: torch.Tensor, roles: torch.Tensor) -> torch.Tensor:
        return routed(self.proj, F.gelu(routed(self.fc, x, roles)), roles)


class Block(nn.Module):
    def __init__(self, config: BackboneConfig):
        super().__init__()
        self.ln_1 = nn.LayerNorm(config.d_model)
        self.attn = CausalSelfAttention(config)
        self.ln_2 = nn.LayerNorm(config.d_model)
        self.mlp = MLP(config)

    def forward(self, x: torch.Tensor, roles: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln_1(x), roles)
        return x + self.mlp(self.ln_2(x), roles)


class ExpertBackbone(nn.Module):
    """
    Frozen decoder + dual adapters + vision-language projector g_phi.

    Example:
        backbone = ExpertBackbone(BackboneConfig(), base_vocab=tok.vocab.base_size)
        visual = backbone.project_visual(t_tokens, s_tokens)
        hidden, logits = backbone(stream)
    """

    def __init__(self, config: BackboneConfig, base_vocab: int):
        super().__init__()
        self.config = config
        self.base_vocab = base_vocab
        self.loc_id = base_vocab
        d = config.d_model

        generator = torch.Generator().manual_seed(config.init_seed)
        self.tok_emb = nn.Embedding(base_vocab, d)
        self.pos_emb = nn.Embedding(config.context, d)
        self.projector = nn.Linear(config.feat_dim, d)
        self.blocks = nn.ModuleList(Block(config) for _ in range(config.n_layers))
        self.ln_f = nn.LayerNorm(d)
        self._init_base(generator)

        # <LOC> starts at the mean base embedding.
        self.loc_emb = nn.Parameter(self.tok_emb.weight.detach().mean(dim=0).clone())
        self.set_trainable()

    def _init_base(self, generator: torch.Generator) -> None:
        with torch.no_grad():
            self.tok_emb.weight.normal_(0.0, _EMBED_STD, generator=generator)
            self.pos_emb.weight.normal_(0.0, _POS_STD, generator=generator)
            for module in self.modules():
                if isinstance(module, nn.Linear) and module is not self.projector:
                    module.weight.normal_(0.0, _WEIGHT_STD, generator=generator)
                    if module.bias is not None:
                        module.bias.zero_()
            self.projector.weight.normal_(0.0, self.config.feat_dim ** -0.5, generator=generator)
            self.projector.bias.zero_()
            # Adapters: A random, B zero, regenerated from the same generator.
            for module in self.modules():
                if isinstance(module, DualLoraLinear):
                    for expert in (module.temporal, module.spatial):
                        if expert is not None:
                            bound = (6.0 / ((1 + 5.0) * expert.lora_A.shape[1])) ** 0.5
                            expert.lora_A.uniform_(-bound, bound, generator=generator)
                            expert.lora_B.zero_()

    def set_trainable(self) -> None:
        """Freeze the base; leave adapters, <LOC> and (optionally) g_phi trainable."""
        frozen = self.config.freeze_base
        for name, param in self.named_parameters():
            if "lora_" in name or name == "loc_emb":
                param.requires_grad = True
            elif name.startswith("projector."):
                param.requires_grad = self.config.train_projector or not frozen
            else:
                param.requires_grad = not frozen

    # -------------------------------------------------------------------------
    # Parameter groups
    # -------------------------------------------------------------------------

    def adapters(self) -> list[DualLoraLinear]:
        return [m for m in self.modules() if isinstance(m, DualLoraLinear)]

    def base_parameters(self) -> dict[str, nn.Parameter]:
        """W_o, base embeddings, norms: everything but adapters, <LOC> and g_phi."""
        return {
            name: p for name, p in self.named_parameters()
            if "lora_" not in name and name != "loc_emb" and not name.startswith("projector.")
        }

    def trainable_parameters(self) -> dict[str, nn.Parameter]:
        return {name: p for name, p in self.named_parameters() if p.requires_grad}

    # -------------------------------------------------------------------------
    # Embedding
    # -------------------------------------------------------------------------

    def embed_tokens(self, ids: torch.Tensor) -> torch.Tensor:
        """Embed text ids; the <LOC> id maps to the trainable loc embedding."""
        if (ids < 0).any() or (ids > self.loc_id).any():
            raise ModelError("token id outside vocabulary")
        is_loc = (ids == self.loc_id).unsqueeze(-1)
        base = self.tok_emb(ids.clamp(max=self.base_vocab - 1))
        return torch.where(is_loc, self.loc_emb.to(base.dtype), base)

    def project_visual(self, t_tokens: torch.Tensor, s_tokens: torch.Tensor) -> torch.Tensor:
        """g_phi applied to [T; S]: [(n + m) x d]."""
        width = self.projector.in_features
        if t_tokens.shape[-1] != width or s_tokens.shape[-1] != width:
            raise ModelError(
                f"visual width mismatch: projector expects {width}, got "
                f"T={t_tokens.shape[-1]}, S={s_tokens.shape[-1]}"
            )
        return self.projector(torch.cat([t_tokens, s_tokens], dim=0))

    def output_embeddings(self) -> torch.Tensor:
        return torch.cat([self.tok_emb.weight, self.loc_emb.unsqueeze(0)], dim=0)

    # -------------------------------------------------------------------------
    # Forward / generate
    # -------------------------------------------------------------------------

    def forward(self, stream: TokenStream | TokenBatch) -> tuple[torch.Tensor, torch.Tensor]:
        """
        Causal pass. Returns final-layer hidden states and logits over the
        extended vocabulary ([L x d], [L x V] for a single stream).
        """
        single = isinstance(stream, TokenStream)
        emb = stream.embeddings.unsqueeze(0) if single else stream.embeddings
        roles = stream.roles.unsqueeze(0) if single else stream.roles
        L = emb.shape[1]
        if L > self.config.context:
            raise ModelError(f"stream of {L} tokens exceeds context {self.config.context}")

        positions = torch.arange(L, device=emb.device)
        x = emb + self.pos_emb(positions).to(emb.dtype)
        for block in self.blocks:
            x = block(x, roles)
        hidden = self.ln_f(x)
        logits = hidden @ self.output_embeddings().to(hidden.dtype).T
        if single:
            return hidden[0], logits[0]
        return hidden, logits

    @torch.no_grad()
    def generate(
        self,
        stream: TokenStream,
        eos_id: int,
        max_len: int = 512,
        forced: Optional[Sequence[int]] = None,
    ) -> GenerationResult:
        """
        Greedy decoding. Each emitted <LOC> contributes its final-layer hidden
        state (at its own position) to loc_hidden, in emission order.
        ``forced`` replays a fixed token sequence instead of taking argmax.
        Decoding stops at whichever comes first of max_len and the room left
        in the context; either limit marks the result truncated.
        """
        n_t = stream.count(Role.T)
        prompt_len = len(stream)
        limit = min(max_len, self.config.context - prompt_len)
        emitted: list[int] = []
        truncated = True
        if forced is not None and len(forced) == 0:
            truncated = False
        for step in range(max(limit, 0)):
            if forced is not None and step >= len(forced):
                truncated = False
                break
            _, logits = self(stream)
            token = int(forced[step]) if forced is not None else int(logits[-1].argmax())
            if token == eos_id:
                truncated = False
                break
            emitted.append(token)
            role = Role.LOC if token == self.loc_id else Role.TEXT
            ids = torch.tensor([token], device=stream.embeddings.device)
            stream = stream.extend(self.embed_tokens(ids)[0], role)
            if forced is not None and step + 1 == len(forced):
                truncated = False
                break

        hidden, _ = self(stream)
        loc_positions = [prompt_len + i for i, t in enumerate(emitted) if t == self.loc_id]
        if truncated:
            logger.debug("generation stopped after %d tokens (max_len=%d, context room=%d)",
                         len(emitted), max_len, limit)
        return GenerationResult(
            token_ids=emitted,
            loc_hidden=[hidden[pos] for pos in loc_positions],
            t_hidden=hidden[:n_t],
            truncated=truncated,
        )
