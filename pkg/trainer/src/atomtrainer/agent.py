"""Autoregressive action generation: playable atoms decide one at a time, in
ascending id order, each conditioned on the moves already planned; the joint
log-probability is the sum of the conditional ones."""

from __future__ import annotations

import torch

from .model import PolicyNetwork


def _entropy(logprobs: torch.Tensor) -> torch.Tensor:
    # replace -inf BEFORE multiplying: 0 * -inf would poison the backward pass
    probs = logprobs.exp()
    safe = torch.where(probs > 0, logprobs, torch.zeros_like(logprobs))
    return -(probs * safe).sum()


def walk_decisions(
    model: PolicyNetwork,
    obs: dict,
    decisions: list[tuple[int, int]] | None = None,
    generator: torch.Generator | None = None,
    greedy: bool = False,
):
    """One pass over the playable atoms.

    With `decisions` given, replays those targets under the current
    parameters (the PPO re-evaluation path); otherwise samples fresh ones.
    Returns (decisions, wire targets, joint log-prob, summed entropy).
    """
    positions = [tuple(p) for p in obs["positions"]]
    cols = int(obs["grid"]["cols"])
    plan: dict[int, tuple[int, int]] = {}
    taken: list[tuple[int, int]] = []
    logps = []
    entropies = []
    replay = iter(decisions) if decisions is not None else None

    for q0 in sorted(obs["playable"]):
        logits = model.policy_logits(obs, q0, plan)
        logprobs = torch.log_softmax(logits, dim=-1)
        if replay is not None:
            planned_q, j = next(replay)
            if planned_q != q0:
                raise ValueError("replayed decisions out of order")
        elif greedy:
            j = int(torch.argmax(logprobs).item())
        else:
            j = int(torch.multinomial(logprobs.exp(), 1, generator=generator).item())
        logps.append(logprobs[j])
        entropies.append(_entropy(logprobs))
        taken.append((q0, j))
        cell = (j % cols, j // cols)
        if cell != positions[q0]:
            plan[q0] = cell

    if logps:
        joint_logp = torch.stack(logps).sum()
        entropy = torch.stack(entropies).sum()
    else:
        joint_logp = torch.zeros(())
        entropy = torch.zeros(())
    targets = [
        {"atom": q, "cell": j}
        for q, j in taken
        if (j % cols, j // cols) != positions[q]
    ]
    return taken, targets, joint_logp, entropy


def act(model: PolicyNetwork, obs: dict,
        generator: torch.Generator | None = None, greedy: bool = False):
    """Sample a full step action. Returns (decisions, targets, logp, entropy)."""
    return walk_decisions(model, obs, None, generator=generator, greedy=greedy)


def state_value(model: PolicyNetwork, obs: dict) -> torch.Tensor:
    """Value of the step state: evaluated for the first playable atom before
    anything is planned."""
    if not obs["playable"]:
        return torch.zeros(())
    return model.value(obs, min(obs["playable"]), {})
