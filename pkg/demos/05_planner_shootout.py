"""Walkthrough: the bundled planners side by side.

Identity never moves (the zero baseline), random churn usually loses money,
greedy takes safe one-step wins, and annealing searches the current step with
a short lookahead. Same circuit, same seeds, straight comparison.
"""

from atomgame import (
    AnnealConfig,
    CostParams,
    Grid,
    anneal_policy,
    greedy_policy,
    identity_policy,
    random_policy,
    reset,
    run_episode,
)
from atomgame.circuit import load_circuit

circuit = load_circuit("benchmarks/random30.json")
grid = Grid(rows=7, cols=10)
params = CostParams(n_atoms=circuit.n_qubits)
print(f"{circuit.n_qubits} qubits, {circuit.n_chunks} chunks, grid {grid.rows}x{grid.cols}\n")

planners = {
    "identity": lambda seed: identity_policy(),
    "random(p=0.2)": lambda seed: random_policy(0.2, seed=seed),
    "greedy": lambda seed: greedy_policy(params, cap=8),
    "anneal": lambda seed: anneal_policy(
        params, AnnealConfig(iterations=40, proposals=8, seed=seed), window=2,
    ),
}

print(f"{'planner':<14} {'mean reduction':>14} {'per-seed %':>30}")
for name, make in planners.items():
    reductions = []
    for seed in range(3):
        state, _ = reset(circuit, grid, params, window=2, seed=seed)
        reductions.append(run_episode(state, make(seed)).reduction_pct)
    mean = sum(reductions) / len(reductions)
    cells = " ".join(f"{r:+7.2f}" for r in reductions)
    print(f"{name:<14} {mean:>13.2f}% {cells:>30}")
