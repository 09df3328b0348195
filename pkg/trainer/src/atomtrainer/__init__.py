"""Transformer policy and PPO trainer for the atomgame wire protocol."""

from .agent import act, state_value, walk_decisions
from .client import StdioEnvClient, TcpEnvClient, baseline_cost, reset_payload
from .eval import episode_reduction, n_shot_eval, play_episode
from .model import ModelConfig, PolicyNetwork
from .ppo import (
    CircuitSpec,
    PPOConfig,
    TrainingDiverged,
    collect_episode,
    load_checkpoint,
    ppo_loss,
    ppo_update,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
