"""Walkthrough: from moves to a scalar fidelity proxy.

A move batch of duration D touching M atoms on an N-atom array costs
alpha*D*N + beta*M. Gate execution pays the storage-side pairing moves plus a
fixed inter-zone round trip. The per-step reward compares gating from the
chosen layout against gating from the episode's initial layout.
"""

from atomgame import (
    CostParams,
    Grid,
    Layout,
    gate_cost,
    layout_cost,
    pair_adjacent_state,
    step_reward,
)

grid = Grid(rows=2, cols=4)
params = CostParams(n_atoms=4)
print("device constants:", params.to_json())

s0 = Layout(((0, 0), (3, 0), (0, 1), (3, 1)))
print("\ninitial layout:", s0.positions)

# What would executing gate (0,1) cost straight from s0?
chunk = ((0, 1),)
paired = pair_adjacent_state(s0, chunk, grid)
print("pairing intermediate:", paired.positions)
g0 = gate_cost(s0, chunk, grid, params)
print(f"gate cost from s0: duration={g0.duration:.3f} touches={g0.touches:.2f} cost={g0.cost:.4f}")

# Reconfigure first: both pair atoms walk one cell toward each other. The
# longest single move shrinks, so the pairing step gets cheaper than the
# reconfiguration charge.
s1 = Layout(((1, 0), (2, 0), (0, 1), (3, 1)))
move = layout_cost(s0, s1, grid, params)
g1 = gate_cost(s1, chunk, grid, params)
print(f"\nreconfiguration cost: {move.cost:.4f}")
print(f"gate cost from s1:    {g1.cost:.4f}")

r = step_reward(s0, s1, chunk, s0, grid, params)
print(f"step reward = -{move.cost:.4f} - {g1.cost:.4f} + {g0.cost:.4f} = {r:.4f}")
print("positive: the meet-in-the-middle reconfiguration beats the baseline")

# Doing nothing is always worth exactly zero.
print("\nidentity reward:", step_reward(s0, s0, chunk, s0, grid, params))
