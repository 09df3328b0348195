import math

import pytest
import torch

from atomtrainer.agent import act, state_value
from atomtrainer.model import PolicyNetwork
from atomtrainer.ppo import (
    EpisodeRecord,
    PPOConfig,
    StepRecord,
    TrainingDiverged,
    attach_gae,
    load_checkpoint,
    ppo_loss,
    ppo_update,
    save_checkpoint,
)

from conftest import tiny_config


def synthetic_steps(model, obs, n=4):
    """Roll decisions forward on the same observation; good enough to feed
    the loss (no env needed)."""
    gen = torch.Generator().manual_seed(7)
    steps = []
    for i in range(n):
        with torch.no_grad():
            decisions, _, logp, _ = act(model, obs, generator=gen)
            value = float(state_value(model, obs))
        steps.append(StepRecord(obs, decisions, float(logp), value, reward=(-1.0) ** i))
    episode = EpisodeRecord(steps, sum(s.reward for s in steps))
    attach_gae(episode, discount=0.99, lam=0.95)
    return steps


def test_gae_hand_computed():
    steps = [
        StepRecord({}, [], 0.0, value=0.5, reward=1.0),
        StepRecord({}, [], 0.0, value=0.2, reward=0.0),
    ]
    attach_gae(EpisodeRecord(steps, 1.0), discount=1.0, lam=1.0)
    # terminal: A_1 = 0 + 0 - 0.2 = -0.2; A_0 = (1 + 0.2 - 0.5) + (-0.2) = 0.5
    assert steps[1].advantage == pytest.approx(-0.2)
    assert steps[0].advantage == pytest.approx(0.5)
    assert steps[0].ret == pytest.approx(1.0)
    assert steps[1].ret == pytest.approx(0.0)


def test_batched_evaluation_matches_sequential(tiny_model, tiny_obs):
    from atomtrainer.agent import walk_decisions
    from atomtrainer.ppo import evaluate_steps

    steps = synthetic_steps(tiny_model, tiny_obs, n=5)
    logp_b, ent_b, val_b = evaluate_steps(tiny_model, steps)
    for i, step in enumerate(steps):
        _, _, logp_s, ent_s = walk_decisions(tiny_model, step.obs, step.decisions)
        val_s = state_value(tiny_model, step.obs)
        assert torch.allclose(logp_b[i], logp_s, atol=1e-5)
        assert torch.allclose(ent_b[i], ent_s, atol=1e-5)
        assert torch.allclose(val_b[i], val_s, atol=1e-5)


def test_ratio_is_one_at_frozen_parameters(tiny_model, tiny_obs):
    steps = synthetic_steps(tiny_model, tiny_obs)
    cfg = PPOConfig()
    adv = [s.advantage for s in steps]
    mean = sum(adv) / len(adv)
    std = math.sqrt(sum((a - mean) ** 2 for a in adv) / len(adv)) + 1e-8
    loss, stats = ppo_loss(tiny_model, steps, cfg, mean, std)
    assert stats["ratio_mean"] == pytest.approx(1.0, abs=1e-6)
    # at ratio 1 the clipped and unclipped surrogates coincide: the policy
    # term equals the negative mean normalized advantage
    expected = -sum((a - mean) / std for a in adv) / len(adv)
    assert stats["policy_loss"] == pytest.approx(expected, abs=1e-5)


def test_ppo_update_changes_parameters(tiny_model, tiny_obs):
    import random

    steps = synthetic_steps(tiny_model, tiny_obs, n=6)
    before = [p.detach().clone() for p in tiny_model.parameters()]
    optimizer = torch.optim.Adam(tiny_model.parameters(), lr=2.5e-4)
    stats = ppo_update(tiny_model, optimizer, steps, PPOConfig(epochs=2, minibatch=3),
                       random.Random(0))
    assert math.isfinite(stats["total_loss"])
    changed = any(
        not torch.equal(b, p.detach()) for b, p in zip(before, tiny_model.parameters())
    )
    assert changed


def test_nan_loss_aborts(tiny_model, tiny_obs):
    import random

    steps = synthetic_steps(tiny_model, tiny_obs)
    with torch.no_grad():
        tiny_model.policy_head[0].weight.fill_(float("nan"))
    optimizer = torch.optim.Adam(tiny_model.parameters(), lr=2.5e-4)
    with pytest.raises(TrainingDiverged):
        ppo_update(tiny_model, optimizer, steps, PPOConfig(), random.Random(0))


def test_checkpoint_round_trip(tiny_model, tmp_path):
    path = str(tmp_path / "model.pt")
    save_checkpoint(tiny_model, PPOConfig(), path, iteration=17)
    loaded, blob = load_checkpoint(path)
    assert blob["iteration"] == 17
    assert blob["model_config"]["embed_dim"] == tiny_model.cfg.embed_dim
    for a, b in zip(tiny_model.state_dict().values(), loaded.state_dict().values()):
        assert torch.equal(a, b)


def test_ppo_config_validation():
    with pytest.raises(ValueError):
        PPOConfig(clip=0.0)
    with pytest.raises(ValueError):
        PPOConfig(discount=0.0)
    with pytest.raises(ValueError):
        PPOConfig(entropy_coef=-1.0)


def test_train_loop_end_to_end(tiny_model, tmp_path):
    from atomtrainer.ppo import CircuitSpec, train

    circuit = {"n_qubits": 4, "chunks": [[[0, 1], [2, 3]], [[1, 2]], [[0, 3]]]}
    spec = CircuitSpec(data=circuit, rows=3, cols=4)
    metrics = tmp_path / "metrics.csv"
    checkpoint = tmp_path / "model.pt"
    result = train(
        tiny_model, [spec], PPOConfig(epochs=1, minibatch=8),
        iterations=3, seed=0,
        metrics_path=str(metrics), checkpoint_path=str(checkpoint),
    )
    assert result.iterations == 3
    assert len(result.mean_rewards) == 3
    lines = metrics.read_text().splitlines()
    assert lines[0].startswith("iteration,mean_reward,mean_reward_ma50")
    assert len(lines) == 4
    loaded, blob = load_checkpoint(str(checkpoint))
    assert blob["iteration"] == 3
