"""Clipped-surrogate PPO over whole-step actions.

Each environment step stores the observation, the per-atom decisions, the
joint log-probability, the value estimate, and the reward. Advantages use
GAE within each episode; updates re-run the autoregressive pass with the
stored decisions to get fresh log-probs, entropies, and values.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import asdict, dataclass

import torch

from .agent import act, state_value
from .client import EnvProtocolError, StdioEnvClient, reset_payload
from .model import ModelConfig, PolicyNetwork, Query

CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class PPOConfig:
    clip: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    learning_rate: float = 2.5e-4
    discount: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 4
    minibatch: int = 64
    episodes_per_rollout: int = 1

    def __post_init__(self):
        if self.clip <= 0:
            raise ValueError("clip must be positive")
        if self.entropy_coef < 0 or self.value_coef < 0:
            raise ValueError("loss coefficients must be nonnegative")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must be in (0, 1]")


@dataclass
class CircuitSpec:
    """A training/eval circuit plus the grid it plays on; `path` feeds the
    baseline-cost probe used by evaluations."""

    data: dict
    rows: int
    cols: int
    path: str = ""


@dataclass
class StepRecord:
    obs: dict
    decisions: list
    logp: float
    value: float
    reward: float
    advantage: float = 0.0
    ret: float = 0.0


@dataclass
class EpisodeRecord:
    steps: list
    total_reward: float


def collect_episode(client, model: PolicyNetwork, payload: dict,
                    generator: torch.Generator | None = None) -> EpisodeRecord:
    resp = client.reset(**payload)
    obs, done = resp["obs"], resp["done"]
    steps: list[StepRecord] = []
    while not done:
        with torch.no_grad():
            value = float(state_value(model, obs))
            decisions, targets, logp, _ = act(model, obs, generator=generator)
        resp = client.step(targets)
        steps.append(StepRecord(obs, decisions, float(logp), value, float(resp["reward"])))
        obs, done = resp["obs"], resp["done"]
    return EpisodeRecord(steps, sum(s.reward for s in steps))


def attach_gae(episode: EpisodeRecord, discount: float, lam: float) -> None:
    """Generalized advantage estimation over one finished episode."""
    advantage = 0.0
    next_value = 0.0
    for step in reversed(episode.steps):
        delta = step.reward + discount * next_value - step.value
        advantage = delta + discount * lam * advantage
        step.advantage = advantage
        step.ret = advantage + step.value
        next_value = step.value


def _shape_key(obs: dict) -> tuple:
    return (obs["grid"]["rows"], obs["grid"]["cols"], len(obs["positions"]))


def _replay_queries(step: StepRecord) -> list[Query]:
    """Queries for every stored decision, with the plan state each one saw."""
    positions = [tuple(p) for p in step.obs["positions"]]
    cols = int(step.obs["grid"]["cols"])
    plan: dict = {}
    queries = []
    for q0, j in step.decisions:
        queries.append(Query(step.obs, q0, dict(plan)))
        cell = (j % cols, j // cols)
        if cell != positions[q0]:
            plan[q0] = cell
    return queries


def _safe_row_entropy(logprobs: torch.Tensor) -> torch.Tensor:
    probs = logprobs.exp()
    safe = torch.where(probs > 0, logprobs, torch.zeros_like(logprobs))
    return -(probs * safe).sum(dim=-1)


def evaluate_steps(model: PolicyNetwork, batch: list[StepRecord]):
    """Fresh (logp, entropy, value) per step under the current parameters.

    Decisions are flattened across the minibatch, grouped by grid/atom-count
    shape, and pushed through the encoders in as few calls as possible."""
    n = len(batch)
    groups: dict[tuple, list] = {}
    for si, step in enumerate(batch):
        for query, (_, j) in zip(_replay_queries(step), step.decisions):
            groups.setdefault(_shape_key(step.obs), []).append((si, j, query))

    logp_steps = torch.zeros(n)
    entropy_steps = torch.zeros(n)
    for _, entries in groups.items():
        owners = torch.tensor([si for si, _, _ in entries])
        choices = torch.tensor([j for _, j, _ in entries])
        logits = model.batch_policy_logits([q for _, _, q in entries])
        logprobs = torch.log_softmax(logits, dim=-1)
        picked = logprobs.gather(1, choices.unsqueeze(1)).squeeze(1)
        logp_steps = logp_steps.index_add(0, owners, picked)
        entropy_steps = entropy_steps.index_add(0, owners, _safe_row_entropy(logprobs))

    value_groups: dict[tuple, list] = {}
    for si, step in enumerate(batch):
        if step.obs["playable"]:
            query = Query(step.obs, min(step.obs["playable"]), {})
            value_groups.setdefault(_shape_key(step.obs), []).append((si, query))
    value_steps = torch.zeros(n)
    for _, entries in value_groups.items():
        owners = torch.tensor([si for si, _ in entries])
        values = model.batch_values([q for _, q in entries])
        value_steps = value_steps.index_add(0, owners, values)
    return logp_steps, entropy_steps, value_steps


def ppo_loss(model: PolicyNetwork, batch: list[StepRecord], cfg: PPOConfig,
             adv_mean: float, adv_std: float) -> tuple[torch.Tensor, dict]:
    """Clipped surrogate + value regression - entropy bonus on one minibatch."""
    logp_new, entropies, value_new = evaluate_steps(model, batch)
    entropy = entropies.mean()

    logp_old = torch.tensor([s.logp for s in batch], dtype=logp_new.dtype)
    advantages = torch.tensor([s.advantage for s in batch], dtype=logp_new.dtype)
    advantages = (advantages - adv_mean) / adv_std
    returns = torch.tensor([s.ret for s in batch], dtype=logp_new.dtype)

    ratio = torch.exp(logp_new - logp_old)
    unclipped = ratio * advantages
    clipped = torch.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * advantages
    policy_loss = -torch.min(unclipped, clipped).mean()
    value_loss = torch.mean((value_new - returns) ** 2)
    total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
    stats = {
        "policy_loss": policy_loss.item(),
        "value_loss": value_loss.item(),
        "entropy": entropy.item(),
        "total_loss": total.item(),
        "ratio_mean": ratio.mean().item(),
    }
    return total, stats


def ppo_update(model: PolicyNetwork, optimizer: torch.optim.Optimizer,
               steps: list[StepRecord], cfg: PPOConfig,
               rng: random.Random) -> dict:
    advantages = [s.advantage for s in steps]
    adv_mean = sum(advantages) / len(advantages)
    adv_var = sum((a - adv_mean) ** 2 for a in advantages) / len(advantages)
    adv_std = math.sqrt(adv_var) + 1e-8

    last_stats: dict = {}
    order = list(range(len(steps)))
    for _ in range(cfg.epochs):
        rng.shuffle(order)
        for start in range(0, len(order), cfg.minibatch):
            batch = [steps[i] for i in order[start:start + cfg.minibatch]]
            loss, last_stats = ppo_loss(model, batch, cfg, adv_mean, adv_std)
            if not math.isfinite(last_stats["total_loss"]):
                raise TrainingDiverged(f"non-finite loss: {last_stats}")
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.max_grad_norm)
            optimizer.step()
    return last_stats


@dataclass
class TrainResult:
    iterations: int
    mean_rewards: list
    ma50: list
    stopped_early: bool


def moving_average(values: list, span: int = 50) -> float:
    window = values[-span:]
    return sum(window) / len(window)


def train(
    model: PolicyNetwork,
    specs: list[CircuitSpec],
    cfg: PPOConfig,
    iterations: int,
    seed: int = 0,
    client=None,
    window: int = 2,
    params: dict | None = None,
    metrics_path: str | None = None,
    checkpoint_path: str | None = None,
    stop_when_ma50_above: float | None = None,
    fixed_layout_seed: int | None = None,
    log_every: int = 0,
) -> TrainResult:
    """The training loop: per iteration, pick a circuit, roll out episodes,
    then run the PPO update. The logged mean reward is the per-step average
    over the iteration's rollout.

    With `fixed_layout_seed`, every episode restarts from the same drawn
    layout (the single-circuit from-scratch setting); otherwise each episode
    draws a fresh one (the multi-circuit transfer setting)."""
    owns_client = client is None
    if owns_client:
        client = StdioEnvClient()
    rng = random.Random(seed)
    generator = torch.Generator().manual_seed(seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    mean_rewards: list[float] = []
    ma50: list[float] = []
    stopped = False
    writer = None
    metrics_file = None
    try:
        if metrics_path:
            metrics_file = open(metrics_path, "w", newline="", encoding="utf-8")
            writer = csv.writer(metrics_file)
            writer.writerow([
                "iteration", "mean_reward", "mean_reward_ma50",
                "policy_loss", "value_loss", "entropy", "total_loss",
            ])
        for iteration in range(1, iterations + 1):
            spec = specs[rng.randrange(len(specs))]
            steps: list[StepRecord] = []
            for _ in range(cfg.episodes_per_rollout):
                layout_seed = (fixed_layout_seed if fixed_layout_seed is not None
                               else rng.getrandbits(31))
                payload = reset_payload(
                    spec.data, spec.rows, spec.cols,
                    seed=layout_seed, window=window, params=params,
                )
                try:
                    episode = collect_episode(client, model, payload, generator=generator)
                except EnvProtocolError:
                    if not owns_client:
                        raise
                    # one reconnect attempt, then give up
                    client.close()
                    client = StdioEnvClient()
                    episode = collect_episode(client, model, payload, generator=generator)
                attach_gae(episode, cfg.discount, cfg.gae_lambda)
                steps.extend(episode.steps)
            if not steps:
                continue
            stats = ppo_update(model, optimizer, steps, cfg, rng)
            mean_rewards.append(sum(s.reward for s in steps) / len(steps))
            ma50.append(moving_average(mean_rewards))
            if writer:
                writer.writerow([
                    iteration, mean_rewards[-1], ma50[-1],
                    stats.get("policy_loss"), stats.get("value_loss"),
                    stats.get("entropy"), stats.get("total_loss"),
                ])
                metrics_file.flush()
            if log_every and iteration % log_every == 0:
                print(f"iter {iteration}: reward {mean_rewards[-1]:+.4f} "
                      f"ma50 {ma50[-1]:+.4f} entropy {stats.get('entropy'):.3f}")
            if (stop_when_ma50_above is not None and iteration >= 50
                    and ma50[-1] > stop_when_ma50_above):
                stopped = True
                break
        if checkpoint_path:
            save_checkpoint(model, cfg, checkpoint_path, len(mean_rewards))
    finally:
        if metrics_file:
            metrics_file.close()
        if owns_client:
            client.close()
    return TrainResult(len(mean_rewards), mean_rewards, ma50, stopped)


def save_checkpoint(model: PolicyNetwork, cfg: PPOConfig, path: str, iteration: int) -> None:
    torch.save({
        "version": CHECKPOINT_VERSION,
        "model_config": asdict(model.cfg),
        "ppo_config": asdict(cfg),
        "iteration": iteration,
        "state_dict": model.state_dict(),
    }, path)


def load_checkpoint(path: str) -> tuple[PolicyNetwork, dict]:
    blob = torch.load(path, weights_only=False)
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {blob.get('version')}")
    model = PolicyNetwork(ModelConfig(**blob["model_config"]))
    model.load_state_dict(blob["state_dict"])
    return model, blob
