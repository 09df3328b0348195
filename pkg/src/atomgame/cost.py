"""Fidelity-proxy cost model for reconfigurations and gate execution.

A move batch of duration D touching M atoms on an N-atom array costs
alpha*D*N + beta*M: idling decoherence for everyone plus pickup/drop-off loss
for the touched atoms. Layout changes and gate execution both reduce to that
one scalar; rewards are measured against the cost of gating from the fixed
initial layout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .circuit import GatePair
from .conflict import active_participants, build_conflict_graph, estimate_moves, moves_between
from .geometry import Cell, Grid, Layout, distance


class CongestionError(RuntimeError):
    """No free cells left to park a gate pair adjacently."""

    def __init__(self, pair: GatePair):
        super().__init__(f"grid too congested to pair up atoms {pair[0]} and {pair[1]}")
        self.pair = pair


@dataclass(frozen=True)
class CostParams:
    """Device constants of the cost model.

    alpha: inverse coherence time per unit duration.
    beta: fidelity loss per atom pickup/drop-off.
    epsilon: fraction of active atoms touched per parallel move.
    gamma_accel: tweezer acceleration constant.
    t_gate: storage-to-gate-region round-trip time.
    n_atoms: number of atoms idling on the array.
    """

    n_atoms: int
    alpha: float = 0.02
    beta: float = 0.002
    epsilon: float = 0.5
    gamma_accel: float = 1.0
    t_gate: float = 10.0

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")
        if self.alpha < 0 or self.beta < 0 or self.t_gate < 0:
            raise ValueError("alpha, beta and t_gate must be nonnegative")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must be in (0, 1]")
        if self.gamma_accel <= 0:
            raise ValueError("gamma_accel must be positive")

    def for_atoms(self, n_atoms: int) -> "CostParams":
        return replace(self, n_atoms=n_atoms)

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "gamma_accel": self.gamma_accel,
            "t_gate": self.t_gate,
            "n_atoms": self.n_atoms,
        }

    @classmethod
    def from_json(cls, obj: dict, n_atoms: int | None = None) -> "CostParams":
        merged = dict(obj)
        if n_atoms is not None and "n_atoms" not in merged:
            merged["n_atoms"] = n_atoms
        return cls(
            n_atoms=int(merged["n_atoms"]),
            alpha=float(merged.get("alpha", 0.02)),
            beta=float(merged.get("beta", 0.002)),
            epsilon=float(merged.get("epsilon", 0.5)),
            gamma_accel=float(merged.get("gamma_accel", 1.0)),
            t_gate=float(merged.get("t_gate", 10.0)),
        )


@dataclass(frozen=True)
class MoveCost:
    duration: float
    touches: float
    cost: float


ZERO_COST = MoveCost(0.0, 0.0, 0.0)


def _scalar_cost(duration: float, touches: float, params: CostParams) -> float:
    return params.alpha * duration * params.n_atoms + params.beta * touches


def layout_cost(s: Layout, s2: Layout, grid: Grid, params: CostParams) -> MoveCost:
    """Cost of reconfiguring the storage region from s to s2.

    Duration is the estimated parallel-move count times the characteristic
    time of the longest constant-acceleration move among active participants;
    touches scale with move count and active-set size.
    """
    moves = moves_between(s, s2)
    if not moves:
        return ZERO_COST
    active = active_participants(s, s2)
    n_m = estimate_moves(build_conflict_graph(moves), moves)
    tau = max(
        math.sqrt(distance(s.positions[q], s2.positions[q], grid.spacing) / params.gamma_accel)
        for q in active.atoms
    )
    duration = n_m * tau
    touches = params.epsilon * n_m * len(active)
    return MoveCost(duration, touches, _scalar_cost(duration, touches, params))


def pair_adjacent_state(s: Layout, chunk: tuple[GatePair, ...], grid: Grid) -> Layout:
    """Deterministic storage-region layout with every gate pair of the chunk
    on 4-adjacent cells.

    Pairs are processed by ascending lower qubit id. A pair already adjacent
    stays put; otherwise the higher-id atom moves to the free 4-neighbor of
    the lower-id atom nearest to it (ties row-major), then the symmetric
    direction is tried, then both atoms move to the free horizontally adjacent
    cell pair nearest their midpoint.
    """
    positions = list(s.positions)
    occupied = set(positions)

    def relocate(atom: int, cell: Cell) -> None:
        occupied.discard(positions[atom])
        positions[atom] = cell
        occupied.add(cell)

    def free_neighbor_nearest(anchor: Cell, mover_cell: Cell) -> Cell | None:
        options = [n for n in grid.neighbors4(anchor) if n not in occupied]
        if not options:
            return None
        return min(options, key=lambda n: (distance(n, mover_cell), grid.flat_index(n)))

    for pair in sorted(chunk):
        a, b = pair
        ca, cb = positions[a], positions[b]
        if abs(ca[0] - cb[0]) + abs(ca[1] - cb[1]) == 1:
            continue
        target = free_neighbor_nearest(ca, cb)
        if target is not None:
            relocate(b, target)
            continue
        target = free_neighbor_nearest(cb, ca)
        if target is not None:
            relocate(a, target)
            continue
        # Last resort: claim a free horizontal cell pair near the midpoint.
        occupied.discard(ca)
        occupied.discard(cb)
        mid = ((ca[0] + cb[0]) / 2.0, (ca[1] + cb[1]) / 2.0)
        best: tuple[float, int, Cell] | None = None
        for r in range(grid.rows):
            for c in range(grid.cols - 1):
                left, right = (c, r), (c + 1, r)
                if left in occupied or right in occupied:
                    continue
                d = math.hypot(c + 0.5 - mid[0], r - mid[1])
                key = (d, grid.flat_index(left))
                if best is None or key < (best[0], best[1]):
                    best = (key[0], key[1], left)
        if best is None:
            raise CongestionError(pair)
        left = best[2]
        positions[a] = left
        positions[b] = (left[0] + 1, left[1])
        occupied.update((positions[a], positions[b]))

    return Layout(tuple(positions))


def gate_cost(s: Layout, chunk: tuple[GatePair, ...], grid: Grid, params: CostParams) -> MoveCost:
    """Cost of executing one chunk from layout s: pair up in storage, then a
    fixed-time round trip to the gate region. Empty chunks cost nothing."""
    if not chunk:
        return ZERO_COST
    paired = pair_adjacent_state(s, chunk, grid)
    prep = layout_cost(s, paired, grid, params)
    duration = prep.duration + params.t_gate
    return MoveCost(duration, prep.touches, _scalar_cost(duration, prep.touches, params))


def step_reward(
    s_t: Layout,
    s_next: Layout,
    chunk: tuple[GatePair, ...],
    s_0: Layout,
    grid: Grid,
    params: CostParams,
) -> float:
    """Cost saved by gating from s_next instead of the initial layout, minus
    the price of moving there."""
    return (
        -layout_cost(s_t, s_next, grid, params).cost
        - gate_cost(s_next, chunk, grid, params).cost
        + gate_cost(s_0, chunk, grid, params).cost
    )


def params_to_file(params: CostParams, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def params_from_file(path: str, n_atoms: int | None = None) -> CostParams:
    with open(path, "r", encoding="utf-8") as fh:
        return CostParams.from_json(json.load(fh), n_atoms=n_atoms)
