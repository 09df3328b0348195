"""Attention must be exactly zero wherever the mask blocks flow, in every
layer and head, for both transformers, on random inputs."""

import torch

from atomtrainer.model import MaskedEncoder, PolicyNetwork

from conftest import tiny_config


def blocked_weights_are_zero(mask: torch.Tensor, attns: list) -> bool:
    """mask: additive (S,S) or (B,S,S); attns: per-layer (B,H,S,S)."""
    if mask.dim() == 2:
        mask = mask.unsqueeze(0)
    blocked = mask == float("-inf")
    for layer_attn in attns:
        b, h, s, _ = layer_attn.shape
        expanded = blocked.unsqueeze(1).expand(b, h, s, s)
        if not torch.all(layer_attn[expanded] == 0.0):
            return False
    return True


def test_encoder_respects_arbitrary_masks():
    torch.manual_seed(3)
    encoder = MaskedEncoder(dim=16, layers=3, heads=4)
    for trial in range(20):
        s = int(torch.randint(4, 12, (1,)))
        allowed = torch.rand(s, s) < 0.4
        allowed |= torch.eye(s, dtype=torch.bool)  # keep rows normalizable
        mask = torch.zeros(s, s).masked_fill(~allowed, float("-inf"))
        x = torch.randn(2, s, 16)
        _, attns = encoder(x, mask)
        assert blocked_weights_are_zero(mask, attns)


def test_policy_attention_blocked_positions_exactly_zero(tiny_model, tiny_obs):
    for q0 in tiny_obs["playable"]:
        _, _, records = tiny_model.dynamic_readout(tiny_obs, q0, {}, collect_attention=True)
        assert records, "expected at least the moves transformer"
        for _, mask, attns in records:
            assert blocked_weights_are_zero(mask, attns)


def test_policy_attention_masks_with_partial_plan(tiny_model, tiny_obs):
    plan = {1: (1, 0), 2: (2, 2)}
    _, _, records = tiny_model.dynamic_readout(tiny_obs, 3, plan, collect_attention=True)
    names = [name for name, _, _ in records]
    assert names == ["moves", "gates"]
    for _, mask, attns in records:
        assert blocked_weights_are_zero(mask, attns)


def test_masks_identical_across_layers(tiny_model, tiny_obs):
    # the same mask object gates every layer: blocked sets must agree layer to layer
    _, _, records = tiny_model.dynamic_readout(tiny_obs, 0, {}, collect_attention=True)
    for _, mask, attns in records:
        zero_sets = []
        for layer_attn in attns:
            zero_sets.append((layer_attn == 0).all(dim=1))  # collapse heads
        for z in zero_sets[1:]:
            base = (mask if mask.dim() == 3 else mask.unsqueeze(0)) == float("-inf")
            assert torch.all(z[base])
