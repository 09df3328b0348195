"""Classical policies for the layout game: do-nothing and random baselines, a
one-step greedy improver, a simulated-annealing lookahead planner, and a
bounded exhaustive search used as a test oracle.

A policy is any callable Observation -> ChunkAction; the remote RL agent
satisfies the same interface over the wire.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .circuit import ChunkedCircuit, playable_atoms
from .cost import CongestionError, CostParams, gate_cost, layout_cost, step_reward
from .env import DEFAULT_WINDOW, ChunkAction, Observation
from .geometry import Cell, CollisionError, Grid, Layout, apply_moves, distance


def identity_policy():
    """Never reconfigure."""
    return lambda obs: {}


def random_policy(p_move: float, seed: int = 0):
    """Each playable atom moves with probability p_move to a uniformly random
    unoccupied cell, occupancy updated as atoms are assigned."""
    if not 0.0 <= p_move <= 1.0:
        raise ValueError("p_move must be in [0, 1]")
    rng = random.Random(seed)

    def policy(obs: Observation) -> ChunkAction:
        occupied = set(obs.positions)
        action: ChunkAction = {}
        for atom in obs.playable:
            if rng.random() >= p_move:
                continue
            free = sorted(
                (cell for cell in obs.grid.all_cells() if cell not in occupied),
                key=obs.grid.flat_index,
            )
            if not free:
                continue
            target = free[rng.randrange(len(free))]
            occupied.discard(obs.positions[atom])
            occupied.add(target)
            action[atom] = target
        return action

    return policy


def _composed(obs: Observation, action: ChunkAction) -> Layout:
    positions = list(obs.positions)
    for atom, cell in action.items():
        positions[atom] = cell
    return Layout(tuple(positions))


def _execution_cost(
    obs: Observation, action: ChunkAction, params: CostParams, horizon: int
) -> float:
    """Reconfiguration cost plus gate cost of the next `horizon` chunks from
    the post-action layout, assuming no further reconfiguration. Layouts too
    congested to pair up score as unusable."""
    s_t = Layout(obs.positions)
    s_next = _composed(obs, action)
    total = layout_cost(s_t, s_next, obs.grid, params).cost
    try:
        for chunk in obs.chunks[:horizon]:
            total += gate_cost(s_next, chunk, obs.grid, params).cost
    except CongestionError:
        return math.inf
    return total


def greedy_policy(params: CostParams, cap: int = 8):
    """One-step hill climber: per playable atom (ascending id), compare
    staying against the `cap` nearest free cells and keep the single-atom
    change that most reduces the immediate move-plus-gate cost; a change is
    kept only if it is a strict improvement."""
    if cap < 0:
        raise ValueError("cap must be >= 0")

    def policy(obs: Observation) -> ChunkAction:
        action: ChunkAction = {}
        for atom in obs.playable:
            base = _execution_cost(obs, action, params, horizon=1)
            occupied = set(_composed(obs, action).positions)
            here = obs.positions[atom]
            candidates = sorted(
                (c for c in obs.grid.all_cells() if c not in occupied),
                key=lambda c: (distance(c, here), obs.grid.flat_index(c)),
            )[:cap]
            best_cost, best_cell = base, None
            for cell in candidates:
                trial = dict(action)
                trial[atom] = cell
                cost = _execution_cost(obs, trial, params, horizon=1)
                if cost < best_cost:
                    best_cost, best_cell = cost, cell
            if best_cell is not None:
                action[atom] = best_cell
        return action

    return policy


@dataclass(frozen=True)
class AnnealConfig:
    proposals: int = 8
    t_initial: float = 0.5
    cooling: float = 0.9
    iterations: int = 40
    seed: int = 0
    horizon: int | None = None  # None: use the playable-atom window

    def __post_init__(self):
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling must be in (0, 1)")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.proposals < 1:
            raise ValueError("proposals must be >= 1")


def anneal_policy(params: CostParams, config: AnnealConfig, window: int = DEFAULT_WINDOW):
    """Simulated annealing over the current step's action, scored by the move
    cost plus the gate cost of an identity-continuation lookahead. Proposals
    mutate one atom's target (move, re-target, or unmove); best action seen
    wins. Zero iterations reproduce the identity policy."""
    rng = random.Random(config.seed)
    horizon = config.horizon if config.horizon is not None else window

    def mutate(obs: Observation, action: ChunkAction) -> ChunkAction | None:
        atom = obs.playable[rng.randrange(len(obs.playable))]
        trial = dict(action)
        if atom in trial and rng.random() < 0.5:
            # unmove, unless another planned atom already claims this cell
            others = {c for a, c in trial.items() if a != atom}
            if obs.positions[atom] in others:
                return None
            del trial[atom]
            return trial
        occupied = set(_composed(obs, trial).positions)
        occupied.discard(trial.get(atom, obs.positions[atom]))
        free = sorted(
            (c for c in obs.grid.all_cells() if c not in occupied and c != obs.positions[atom]),
            key=obs.grid.flat_index,
        )
        if not free:
            return None
        trial[atom] = free[rng.randrange(len(free))]
        return trial

    def policy(obs: Observation) -> ChunkAction:
        if not obs.playable:
            return {}
        current: ChunkAction = {}
        current_cost = _execution_cost(obs, current, params, horizon)
        best, best_cost = dict(current), current_cost
        temp = config.t_initial
        for _ in range(config.iterations):
            for _ in range(config.proposals):
                trial = mutate(obs, current)
                if trial is None:
                    continue
                cost = _execution_cost(obs, trial, params, horizon)
                delta = current_cost - cost  # positive = improvement
                if delta >= 0 or rng.random() < math.exp(delta / max(temp, 1e-12)):
                    current, current_cost = trial, cost
                    if cost < best_cost:
                        best, best_cost = dict(trial), cost
            temp *= config.cooling
        return best

    return policy


class SearchBoundExceeded(RuntimeError):
    """The exhaustive search space is larger than the configured bound."""


def _step_actions(positions: tuple[Cell, ...], playable: list[int], grid: Grid):
    """All legal actions for one step: every assignment of playable atoms to
    stay-or-any-cell that yields a collision-free layout."""
    cells = grid.all_cells()

    def rec(i: int, action: ChunkAction):
        if i == len(playable):
            layout = Layout(positions)
            try:
                apply_moves(layout, action, grid)
            except (CollisionError, ValueError):
                return
            yield dict(action)
            return
        atom = playable[i]
        yield from rec(i + 1, action)  # stay
        for cell in cells:
            if cell == positions[atom]:
                continue
            action[atom] = cell
            yield from rec(i + 1, action)
            del action[atom]

    yield from rec(0, {})


def brute_force_optimum(
    circuit: ChunkedCircuit,
    grid: Grid,
    params: CostParams,
    s0: Layout,
    window: int = DEFAULT_WINDOW,
    bound: int = 500_000,
) -> tuple[list[ChunkAction], float]:
    """Exhaustive search over whole action sequences; the reference optimum
    for tiny instances. Raises SearchBoundExceeded past `bound` evaluated
    actions."""
    evaluated = 0

    def rec(s_t: Layout, t: int) -> tuple[list[ChunkAction], float]:
        nonlocal evaluated
        if t == circuit.n_chunks:
            return [], 0.0
        playable = playable_atoms(circuit, t, window)
        chunk = circuit.chunks[t]
        best_actions: list[ChunkAction] | None = None
        best_reward = -math.inf
        for action in _step_actions(s_t.positions, playable, grid):
            evaluated += 1
            if evaluated > bound:
                raise SearchBoundExceeded(f"more than {bound} actions evaluated")
            s_next = apply_moves(s_t, action, grid)
            try:
                r = step_reward(s_t, s_next, chunk, s0, grid, params)
            except CongestionError:
                continue  # a layout the gates cannot execute from is never optimal
            tail_actions, tail_reward = rec(s_next, t + 1)
            if r + tail_reward > best_reward:
                best_actions = [action] + tail_actions
                best_reward = r + tail_reward
        if best_actions is None:
            raise CongestionError(chunk[0] if chunk else (0, 1))
        return best_actions, best_reward

    return rec(s0, 0)
