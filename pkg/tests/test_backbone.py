"""Tests for the expert backbone: frozen base, routing, <LOC> and generation."""

import math

import pytest
import torch
import torch.nn.functional as F

from vexpert.errors import ModelError
from vexpert.model.adapters import DualLoraLinear
from vexpert.model.backbone import ExpertBackbone, TokenBatch, TokenStream
from vexpert.schema import ROLE_CODES, BackboneConfig, DualAdapterConfig, Role

T, S, TEXT, LOC = (ROLE_CODES[r] for r in (Role.T, Role.S, Role.TEXT, Role.LOC))
VOCAB = 40


def small_config(**overrides) -> BackboneConfig:
    base = dict(d_model=32, n_layers=2, n_heads=2, context=64, feat_dim=8,
                adapter=DualAdapterConfig(total_rank=8, lora_alpha=8.0, targets=["q", "v", "fc"]))
    base.update(overrides)
    return BackboneConfig(**base)


def stream_of(backbone: ExpertBackbone, n_t=3, n_s=2, ids=(5, 6, 7), seed=0) -> TokenStream:
    g = torch.Generator().manual_seed(seed)
    visual = backbone.project_visual(
        torch.randn(n_t, backbone.config.feat_dim, generator=g),
        torch.randn(n_s, backbone.config.feat_dim, generator=g),
    )
    id_tensor = torch.tensor(list(ids))
    text = backbone.embed_tokens(id_tensor)
    roles = torch.tensor([T] * n_t + [S] * n_s + [LOC if i == backbone.loc_id else TEXT for i in ids])
    return TokenStream(torch.cat([visual, text]).detach(), roles)


def randomize_adapters(backbone: ExpertBackbone, which: str, seed: int):
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for layer in backbone.adapters():
            delta = getattr(layer, which)
            delta.lora_B.copy_(torch.randn(delta.lora_B.shape, generator=g) * 0.1)


def test_zero_adapters_reproduce_the_base_model():
    adapted = ExpertBackbone(small_config(), VOCAB)
    plain = ExpertBackbone(small_config(adapter=DualAdapterConfig(total_rank=8, targets=[])), VOCAB)
    stream = stream_of(adapted)
    plain.projector.load_state_dict(adapted.projector.state_dict())
    _, with_adapters = adapted(stream)
    _, without = plain(stream)
    torch.testing.assert_close(with_adapters, without, atol=1e-6, rtol=0)


def test_batch_of_one_matches_batch_of_two():
    backbone = ExpertBackbone(small_config(), VOCAB)
    stream = stream_of(backbone)
    hidden_one, logits_one = backbone(TokenBatch.collate([stream]))
    hidden_two, logits_two = backbone(TokenBatch.collate([stream, stream]))
    torch.testing.assert_close(logits_one[0], logits_two[1], atol=1e-6, rtol=0)
    torch.testing.assert_close(hidden_one[0], hidden_two[0], atol=1e-6, rtol=0)


def test_padding_does_not_leak_into_real_positions():
    backbone = ExpertBackbone(small_config(), VOCAB)
    short = stream_of(backbone, ids=(5,))
    long = stream_of(backbone, ids=(5, 6, 7, 8), seed=1)
    hidden, _ = backbone(TokenBatch.collate([short, long]))
    alone, _ = backbone(short)
    torch.testing.assert_close(hidden[0, : len(short)], alone, atol=1e-5, rtol=0)


def reference_forward(backbone: ExpertBackbone, emb: torch.Tensor) -> torch.Tensor:
    """A straight-line decoder over the base weights (adapters at zero)."""

    def lin(m):
        m = m.base if isinstance(m, DualLoraLinear) else m
        return lambda x: x @ m.weight.T + m.bias

    L, d = emb.shape
    h = backbone.config.n_heads
    x = emb + backbone.pos_emb.weight[:L]
    mask = torch.triu(torch.ones(L, L, dtype=torch.bool), diagonal=1)
    for block in backbone.blocks:
        a = F.layer_norm(x, (d,), block.ln_1.weight, block.ln_1.bias)
        q, k, v = (lin(getattr(block.attn, n))(a) for n in ("q", "k", "v"))
        out = torch.zeros_like(a)
        hd = d // h
        for head in range(h):
            cols = slice(head * hd, (head + 1) * hd)
            scores = q[:, cols] @ k[:, cols].T / math.sqrt(hd)
            scores = scores.masked_fill(mask, float("-inf"))
            out[:, cols] = torch.softmax(scores, dim=-1) @ v[:, cols]
        x = x + lin(block.attn.o)(out)
        m = F.layer_norm(x, (d,), block.ln_2.weight, block.ln_2.bias)
        x = x + lin(block.mlp.proj)(F.gelu(lin(block.mlp.fc)(m)))
    hidden = F.layer_norm(x, (d,), backbone.ln_f.weight, backbone.ln_f.bias)
    return hidden @ backbone.output_embeddings().T


def test_matches_straight_line_reference():
    backbone = ExpertBackbone(small_config(), VOCAB)
    stream = stream_of(backbone, n_t=2, n_s=1, ids=(3, 4))
    assert len(stream) == 5
    _, logits = backbone(stream)
    with torch.no_grad():
        expected = reference_forward(backbone, stream.embeddings)
    torch.testing.assert_close(logits, expected, atol=1e-5, rtol=0)


def test_adapter_routing_through_the_whole_model():
    backbone = ExpertBackbone(small_config(n_layers=1), VOCAB)
    stream = stream_of(backbone)
    _, before = backbone(stream)
    randomize_adapters(backbone, "spatial", 1)
    _, after = backbone(stream)
    # Causal attention: the T prefix sees only T rows, so spatial weights cannot reach it.
    torch.testing.assert_close(before[:3], after[:3], atol=1e-6, rtol=0)
    assert (before[3:] - after[3:]).abs().max() > 1e-4


def test_context_limit():
    backbone = ExpertBackbone(small_config(context=8), VOCAB)
    with pytest.raises(ModelError, match="exceeds context"):
        backbone(stream_of(backbone, n_t=5, n_s=2, ids=(1, 2)))


def test_stream_order_enforced():
    with pytest.raises(ModelError, match="T-tokens, then S-tokens"):
        TokenStream(torch.zeros(3, 4), torch.tensor([S, T, TEXT]))
    with pytest.raises(ModelError):
        TokenStream(torch.zeros(3, 4), torch.tensor([T, S]))


def test_loc_embedding():
    backbone = ExpertBackbone(small_config(), VOCAB)
    assert backbone.loc_id == VOCAB
    emb = backbone.embed_tokens(torch.tensor([1, VOCAB]))
    assert torch.equal(emb[1], backbone.loc_emb.detach())
    torch.testing.assert_close(backbone.loc_emb.detach(), backbone.tok_emb.weight.mean(dim=0).detach())
    assert backbone.output_embeddings().shape == (VOCAB + 1, 32)
    with pytest.raises(ModelError):
        backbone.embed_tokens(torch.tensor([VOCAB + 1]))


def test_projector_width_checked():
    backbone = ExpertBackbone(small_config(), VOCAB)
    with pytest.raises(ModelError, match="visual width mismatch"):
        backbone.project_visual(torch.zeros(2, 7), torch.zeros(1, 8))


def test_trainable_sets():
    backbone = ExpertBackbone(small_config(), VOCAB)
    trainable = backbone.trainable_parameters()
    assert "loc_emb" in trainable
    assert all(("lora_" in n) or n == "loc_emb" or n.startswith("projector.") for n in trainable)
    assert not any(p.requires_grad for p in backbone.base_parameters().values())
    frozen_projector = ExpertBackbone(small_config(train_projector=False), VOCAB)
    assert not frozen_projector.projector.weight.requires_grad


def test_seeded_initialisation():
    a = ExpertBackbone(small_config(), VOCAB)
    b = ExpertBackbone(small_config(), VOCAB)
    for (name, pa), (_, pb) in zip(a.state_dict().items(), b.state_dict().items()):
        assert torch.equal(pa, pb), name


def test_forced_generation_matches_teacher_forcing():
    backbone = ExpertBackbone(small_config(), VOCAB)
    randomize_adapters(backbone, "temporal", 2)
    randomize_adapters(backbone, "spatial", 3)
    eos = 2
    prompt = stream_of(backbone, ids=(1, 9, 10))
    forced = [11, VOCAB, 12, VOCAB, 13, eos]

    result = backbone.generate(prompt, eos, forced=forced)
    assert result.token_ids == forced[:-1]
    assert len(result.loc_hidden) == 2
    assert not result.truncated
    assert result.t_hidden.shape == (3, 32)

    full = stream_of(backbone, ids=(1, 9, 10) + tuple(forced[:-1]))
    with torch.no_grad():
        hidden, _ = backbone(full)
    offset = len(prompt)
    positions = [offset + i for i, t in enumerate(forced[:-1]) if t == VOCAB]
    for got, pos in zip(result.loc_hidden, positions):
        torch.testing.assert_close(got, hidden[pos], atol=1e-5, rtol=0)


def test_generation_stops_at_max_len():
    backbone = ExpertBackbone(small_config(), VOCAB)
    result = backbone.generate(stream_of(backbone), eos_id=-1, max_len=4)
    assert len(result.token_ids) == 4
    assert result.truncated


def test_generation_stops_at_the_context_limit():
    backbone = ExpertBackbone(small_config(context=16), VOCAB)
    stream = stream_of(backbone)
    result = backbone.generate(stream, eos_id=-1, max_len=512)
    assert len(result.token_ids) == 16 - len(stream)
    assert result.truncated


def test_fully_replayed_forced_sequence_is_not_truncated():
    backbone = ExpertBackbone(small_config(), VOCAB)
    forced = [11, VOCAB, 12, 13]
    result = backbone.generate(stream_of(backbone), eos_id=2, max_len=len(forced), forced=forced)
    assert result.token_ids == forced
    assert len(result.loc_hidden) == 1
    assert not result.truncated

    cut = backbone.generate(stream_of(backbone), eos_id=2, max_len=3, forced=forced)
    assert cut.token_ids == forced[:3]
    assert cut.truncated
