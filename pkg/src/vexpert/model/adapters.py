# vexpert - Position-routed low-rank adapters
# Copyright (C) 2026 Free & Fair

"""
Dual low-rank adaptation of a frozen linear layer.

    y = W_o x                      everywhere
    y += B_T A_T x * alpha / r_T   at T rows only      (temporal expert)
    y += B_S A_S x * alpha / r_S   at S, TEXT and LOC rows (spatial expert)

Rows are selected with torch.where, so outputs at rows of one role are
bitwise independent of the other expert's weights.
"""

from __future__ import annotations

import math
from typing import Optional

import torch
from torch import nn

from ..schema.types import ROLE_CODES, Role

T_CODE = ROLE_CODES[Role.T]


class LowRankDelta(nn.Module):
    """B @ A scaled by alpha / rank; B starts at zero so the delta starts at zero."""

    def __init__(self, in_features: int, out_features: int, rank: int, lora_alpha: float):
        super().__init__()
        self.rank = rank
        self.scaling = lora_alpha / rank
        self.lora_A = nn.Parameter(torch.empty(rank, in_features))
        self.lora_B = nn.Parameter(torch.zeros(out_features, rank))
        nn.init.kaiming_uniform_(self.lora_A, a=math.sqrt(5))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return (x @ self.lora_A.T) @ self.lora_B.T * self.scaling

    def delta_weight(self) -> torch.Tensor:
        return self.lora_B @ self.lora_A * self.scaling


class DualLoraLinear(nn.Module):
    """A frozen nn.Linear with a temporal and a spatial low-rank adapter."""

    def __init__(self, base: nn.Linear, temporal_rank: int, spatial_rank: int, lora_alpha: float):
        super().__init__()
        self.base = base
        for p in self.base.parameters():
            p.requires_grad = False
        self.temporal: Optional[LowRankDelta] = (
            LowRankDelta(base.in_features, base.out_features, temporal_rank, lora_alpha) if temporal_rank > 0 else None
        )
        self.spatial: Optional[LowRankDelta] = (
            LowRankDelta(base.in_features, base.out_features, spatial_rank, lora_alpha) if spatial_rank > 0 else None
        )

    def forward(self, x: torch.Tensor, roles: torch.Tensor) -> torch.Tensor:
        """x: [..., L, in], roles: [..., L] integer role codes."""
        y = self.base(x)
        t_rows = (roles == T_CODE).unsqueeze(-1)
        if self.temporal is not None:
            y = y + torch.where(t_rows, self.temporal(x), torch.zeros_like(y))
        if self.spatial is not None:
            y = y + torch.where(t_rows, torch.zeros_like(y), self.spatial(x))
        return y

    def adapter_parameters(self) -> list[nn.Parameter]:
        params: list[nn.Parameter] = []
        for expert in (self.temporal, self.spatial):
            if expert is not None:
                params.extend(expert.parameters())
        return params


def routed(layer: nn.Module, x: torch.Tensor, roles: torch.Tensor) -> torch.Tensor:
    """Call a projection that may or may not be adapted."""
    if isinstance(layer, DualLoraLinear):
        return layer(x, roles)
    return layer(x)
