"""The Atom Game episode: one deterministic MDP over storage-region layouts.

Each step t reconfigures the storage region (the action), then executes gate
chunk t from the new layout. The reward is the gate cost that the fixed
initial layout would have paid, minus what the chosen layout pays, minus the
reconfiguration itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .circuit import ChunkedCircuit, GatePair, playable_atoms
from .cost import CostParams, gate_cost, step_reward
from .geometry import Cell, CollisionError, Grid, Layout, apply_moves, initial_layout

ChunkAction = dict[int, Cell]  # playable atom -> target cell; absent atoms stay

DEFAULT_WINDOW = 2
DEFAULT_HORIZON_CAP = 8


class InvalidActionError(ValueError):
    """Action rejected; the episode state is untouched."""


@dataclass
class EnvState:
    circuit: ChunkedCircuit
    grid: Grid
    params: CostParams
    window: int
    horizon_cap: int
    s0: Layout
    s_t: Layout
    t: int
    done: bool
    baseline_costs: tuple[float, ...]

    @property
    def n_chunks(self) -> int:
        return self.circuit.n_chunks

    @property
    def baseline_total(self) -> float:
        return sum(self.baseline_costs)


@dataclass(frozen=True)
class Observation:
    """Everything a policy may look at: where we are in the circuit, the
    current and initial layouts, which atoms it may move, and the upcoming
    chunks (capped)."""

    t: int
    n_chunks: int
    grid: Grid
    positions: tuple[Cell, ...]
    initial_positions: tuple[Cell, ...]
    playable: tuple[int, ...]
    chunks: tuple[tuple[GatePair, ...], ...]
    done: bool


@dataclass(frozen=True)
class Transition:
    t: int
    s_t: Layout
    action: ChunkAction
    reward: float
    s_next: Layout
    done: bool


@dataclass
class EpisodeResult:
    transitions: list[Transition]
    total_reward: float
    baseline_cost: float
    reduction_pct: float


def reset(
    circuit: ChunkedCircuit,
    grid: Grid,
    params: CostParams,
    window: int = DEFAULT_WINDOW,
    seed: int = 0,
    layout_mode: str = "random",
    horizon_cap: int = DEFAULT_HORIZON_CAP,
) -> tuple[EnvState, Observation]:
    """Start an episode: draw the initial layout and cache the per-chunk
    baseline gate costs."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if horizon_cap < 1:
        raise ValueError("horizon_cap must be >= 1")
    if params.n_atoms != circuit.n_qubits:
        raise ValueError(
            f"params cover {params.n_atoms} atoms but the circuit has {circuit.n_qubits}"
        )
    s0 = initial_layout(grid, circuit.n_qubits, mode=layout_mode, seed=seed)
    baseline = tuple(gate_cost(s0, chunk, grid, params).cost for chunk in circuit.chunks)
    state = EnvState(
        circuit=circuit,
        grid=grid,
        params=params,
        window=window,
        horizon_cap=horizon_cap,
        s0=s0,
        s_t=s0,
        t=0,
        done=circuit.n_chunks == 0,
        baseline_costs=baseline,
    )
    return state, observe(state)


def observe(state: EnvState) -> Observation:
    if state.done:
        playable: tuple[int, ...] = ()
        upcoming: tuple[tuple[GatePair, ...], ...] = ()
    else:
        playable = tuple(playable_atoms(state.circuit, state.t, state.window))
        upcoming = state.circuit.chunks[state.t:state.t + state.horizon_cap]
    return Observation(
        t=state.t,
        n_chunks=state.circuit.n_chunks,
        grid=state.grid,
        positions=state.s_t.positions,
        initial_positions=state.s0.positions,
        playable=playable,
        chunks=upcoming,
        done=state.done,
    )


def _validated_next(state: EnvState, action: ChunkAction) -> Layout:
    playable = set(playable_atoms(state.circuit, state.t, state.window))
    for atom in action:
        if atom not in playable:
            raise InvalidActionError(f"atom {atom} is not playable at step {state.t}")
    try:
        return apply_moves(state.s_t, action, state.grid)
    except (CollisionError, ValueError) as exc:
        raise InvalidActionError(str(exc)) from exc


def step(state: EnvState, action: ChunkAction) -> tuple[Transition, Observation]:
    """Advance one chunk. Raises InvalidActionError (state unchanged) for a
    finished episode, a non-playable atom, an out-of-bounds cell, or a
    collision."""
    if state.done:
        raise InvalidActionError("episode is done")
    s_next = _validated_next(state, action)
    chunk = state.circuit.chunks[state.t]
    reward = step_reward(state.s_t, s_next, chunk, state.s0, state.grid, state.params)
    transition = Transition(
        t=state.t,
        s_t=state.s_t,
        action=dict(action),
        reward=reward,
        s_next=s_next,
        done=state.t + 1 == state.n_chunks,
    )
    state.s_t = s_next
    state.t += 1
    state.done = transition.done
    return transition, observe(state)


def run_episode(state: EnvState, policy) -> EpisodeResult:
    """Play the episode out with `policy(observation) -> ChunkAction`."""
    transitions: list[Transition] = []
    obs = observe(state)
    while not state.done:
        transition, obs = step(state, policy(obs))
        transitions.append(transition)
    total = sum(tr.reward for tr in transitions)
    baseline = state.baseline_total
    reduction = 100.0 * total / baseline if baseline > 0 else 0.0
    return EpisodeResult(transitions, total, baseline, reduction)


def count_layout_changes(transitions: list[Transition]) -> int:
    """Action entries that actually relocated an atom."""
    return sum(
        1
        for tr in transitions
        for atom, cell in tr.action.items()
        if tr.s_t.positions[atom] != cell
    )


def transition_to_json(tr: Transition) -> dict:
    return {
        "t": tr.t,
        "s_t": [list(c) for c in tr.s_t.positions],
        "action": [{"atom": a, "cell": list(c)} for a, c in sorted(tr.action.items())],
        "reward": tr.reward,
        "s_next": [list(c) for c in tr.s_next.positions],
        "done": tr.done,
    }


def write_trace(transitions: list[Transition], path: str) -> None:
    """Episode trace as JSON lines, one transition per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for tr in transitions:
            fh.write(json.dumps(transition_to_json(tr), sort_keys=True, separators=(",", ":")))
            fh.write("\n")
