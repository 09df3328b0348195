import pytest
import torch

from atomtrainer.model import ModelConfig, PolicyNetwork


def tiny_config(**overrides) -> ModelConfig:
    base = dict(
        rows=3, cols=4, n_atoms=4,
        embed_dim=16, layers=2, heads=4,
        time_dim=8, atom_dim=8, board_dim=4,
        head_hidden=16, horizon=3,
    )
    base.update(overrides)
    return ModelConfig(**base)


@pytest.fixture
def tiny_model():
    torch.manual_seed(0)
    return PolicyNetwork(tiny_config())


@pytest.fixture
def tiny_obs():
    return {
        "t": 0,
        "T": 3,
        "grid": {"rows": 3, "cols": 4},
        "positions": [[0, 0], [3, 0], [0, 1], [3, 1]],
        "initial_positions": [[0, 0], [3, 0], [0, 1], [3, 1]],
        "playable": [0, 1, 2, 3],
        "chunks": [[[0, 1], [2, 3]], [[1, 2]], [[0, 1]]],
        "done": False,
    }
