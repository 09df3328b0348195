"""Autodiff gradients of the full PPO loss agree with central finite
differences at toy scale (float64, directional and per-coordinate probes)."""

import math
import random

import pytest
import torch

from atomtrainer.agent import act, state_value
from atomtrainer.model import ModelConfig, PolicyNetwork
from atomtrainer.ppo import EpisodeRecord, PPOConfig, StepRecord, attach_gae, ppo_loss


@pytest.fixture
def double_precision():
    previous = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield
    torch.set_default_dtype(previous)


def build_problem():
    torch.manual_seed(42)
    cfg = ModelConfig(rows=2, cols=3, n_atoms=3, embed_dim=8, layers=1, heads=2,
                      time_dim=4, atom_dim=4, board_dim=3, head_hidden=8, horizon=2)
    model = PolicyNetwork(cfg)
    obs = {
        "t": 0, "T": 2, "grid": {"rows": 2, "cols": 3},
        "positions": [[0, 0], [2, 1], [0, 1]],
        "initial_positions": [[0, 0], [2, 1], [0, 1]],
        "playable": [0, 1, 2],
        "chunks": [[[0, 1]], [[1, 2]]],
        "done": False,
    }
    gen = torch.Generator().manual_seed(3)
    steps = []
    for i in range(3):
        with torch.no_grad():
            decisions, _, logp, _ = act(model, obs, generator=gen)
            value = float(state_value(model, obs))
        steps.append(StepRecord(obs, decisions, float(logp), value, reward=0.3 * (-1.0) ** i))
    attach_gae(EpisodeRecord(steps, 0.0), discount=0.99, lam=0.95)

    # nudge the parameters so the ratios move off exactly 1 (still inside the
    # clip band, where the surrogate is smooth)
    with torch.no_grad():
        shift = torch.Generator().manual_seed(9)
        for p in model.parameters():
            p.add_(1e-3 * torch.randn(p.shape, generator=shift))

    cfg_ppo = PPOConfig()
    adv = [s.advantage for s in steps]
    mean = sum(adv) / len(adv)
    std = math.sqrt(sum((a - mean) ** 2 for a in adv) / len(adv)) + 1e-8

    def loss_fn():
        return ppo_loss(model, steps, cfg_ppo, mean, std)[0]

    return model, loss_fn


def flatten_grads(model):
    return torch.cat([p.grad.reshape(-1) for p in model.parameters()])


def flatten_params(model):
    return [p for p in model.parameters()]


def test_gradcheck_full_ppo_loss(double_precision):
    model, loss_fn = build_problem()
    loss = loss_fn()
    model.zero_grad()
    loss.backward()
    grad = flatten_grads(model)
    assert torch.isfinite(grad).all()

    params = flatten_params(model)
    sizes = [p.numel() for p in params]
    total = sum(sizes)
    h = 1e-6

    def loss_at_offset(direction: torch.Tensor) -> float:
        with torch.no_grad():
            offset = 0
            for p, n in zip(params, sizes):
                p.add_(direction[offset:offset + n].reshape(p.shape))
                offset += n
        value = float(loss_fn().detach())
        with torch.no_grad():
            offset = 0
            for p, n in zip(params, sizes):
                p.sub_(direction[offset:offset + n].reshape(p.shape))
                offset += n
        return value

    # directional probes
    gen = torch.Generator().manual_seed(17)
    worst = 0.0
    for _ in range(5):
        v = torch.randn(total, generator=gen)
        v = v / v.norm()
        fd = (loss_at_offset(h * v) - loss_at_offset(-h * v)) / (2 * h)
        ad = float(grad @ v)
        rel = abs(fd - ad) / max(abs(fd), abs(ad), 1e-10)
        worst = max(worst, rel)
    assert worst < 1e-3, f"directional gradcheck off by {worst:.2e}"

    # per-coordinate probes on a random sample
    rng = random.Random(23)
    coords = rng.sample(range(total), 25)
    for idx in coords:
        e = torch.zeros(total)
        e[idx] = 1.0
        fd = (loss_at_offset(h * e) - loss_at_offset(-h * e)) / (2 * h)
        ad = float(grad[idx])
        rel = abs(fd - ad) / max(abs(fd), abs(ad), 1e-8)
        assert rel < 1e-3, f"coordinate {idx}: fd={fd:.3e} ad={ad:.3e} rel={rel:.2e}"
