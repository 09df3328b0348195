"""Evaluation: play episodes against the protocol and score cost reduction
against the no-reconfiguration baseline read from the compile CLI."""

from __future__ import annotations

import torch

from .agent import act
from .client import baseline_cost, reset_payload
from .model import PolicyNetwork
from .ppo import CircuitSpec


def play_episode(client, model: PolicyNetwork, payload: dict,
                 shot_seed: int = 0, greedy: bool = False) -> float:
    generator = torch.Generator().manual_seed(shot_seed)
    resp = client.reset(**payload)
    obs, done = resp["obs"], resp["done"]
    total = 0.0
    with torch.no_grad():
        while not done:
            _, targets, _, _ = act(model, obs, generator=generator, greedy=greedy)
            resp = client.step(targets)
            total += float(resp["reward"])
            obs, done = resp["obs"], resp["done"]
    return total


def episode_reduction(client, model: PolicyNetwork, spec: CircuitSpec, seed: int,
                      window: int = 2, params: dict | None = None,
                      greedy: bool = False, shot_seed: int = 0,
                      baseline: float | None = None) -> float:
    """Cost reduction (%) of one episode relative to never reconfiguring."""
    if baseline is None:
        baseline = baseline_cost(spec.path, spec.rows, spec.cols, seed, window=window)
    payload = reset_payload(spec.data, spec.rows, spec.cols, seed=seed,
                            window=window, params=params)
    total = play_episode(client, model, payload, shot_seed=shot_seed, greedy=greedy)
    return 100.0 * total / baseline if baseline > 0 else 0.0


def n_shot_eval(client, model: PolicyNetwork, spec: CircuitSpec, n: int,
                seed: int = 0, window: int = 2,
                params: dict | None = None) -> float:
    """Best reduction over n independent runs of the same episode; shot k of
    a larger n replays shot k of a smaller one, so best-of-n is monotone."""
    if n < 1:
        raise ValueError("n must be >= 1")
    baseline = baseline_cost(spec.path, spec.rows, spec.cols, seed, window=window)
    best = None
    for shot in range(n):
        reduction = episode_reduction(
            client, model, spec, seed, window=window, params=params,
            shot_seed=shot, baseline=baseline,
        )
        best = reduction if best is None else max(best, reduction)
    return best
