import json

import pytest
import torch

from atomtrainer.client import StdioEnvClient, baseline_cost, reset_payload
from atomtrainer.eval import episode_reduction, n_shot_eval, play_episode
from atomtrainer.model import PolicyNetwork
from atomtrainer.ppo import CircuitSpec

from conftest import tiny_config

CIRCUIT = {"n_qubits": 4, "chunks": [[[0, 1], [2, 3]], [[1, 2]], [[0, 3]]]}


@pytest.fixture
def spec(tmp_path):
    path = tmp_path / "eval_circuit.json"
    path.write_text(json.dumps(CIRCUIT))
    return CircuitSpec(data=CIRCUIT, rows=3, cols=4, path=str(path))


@pytest.fixture
def model():
    torch.manual_seed(1)
    return PolicyNetwork(tiny_config())


def test_play_episode_is_shot_deterministic(model, spec):
    with StdioEnvClient() as client:
        payload = reset_payload(CIRCUIT, rows=3, cols=4, seed=2)
        a = play_episode(client, model, payload, shot_seed=7)
        b = play_episode(client, model, payload, shot_seed=7)
        c = play_episode(client, model, payload, shot_seed=8)
    assert a == b
    assert a != c  # different shot, different sampled actions


def test_one_shot_equals_single_episode(model, spec):
    with StdioEnvClient() as client:
        single = episode_reduction(client, model, spec, seed=3, shot_seed=0)
        best = n_shot_eval(client, model, spec, n=1, seed=3)
    assert best == pytest.approx(single)


def test_best_over_n_is_monotone_for_nested_shots(model, spec):
    with StdioEnvClient() as client:
        values = [n_shot_eval(client, model, spec, n=n, seed=3) for n in (1, 3, 6)]
    assert values[0] <= values[1] <= values[2]


def test_reduction_uses_cli_baseline(model, spec):
    baseline = baseline_cost(spec.path, spec.rows, spec.cols, seed=3)
    assert baseline > 0
    with StdioEnvClient() as client:
        payload = reset_payload(CIRCUIT, rows=3, cols=4, seed=3)
        total = play_episode(client, model, payload, shot_seed=0)
        reduction = episode_reduction(client, model, spec, seed=3, shot_seed=0)
    assert reduction == pytest.approx(100.0 * total / baseline)
