"""Move synthesis for zoned reconfigurable neutral-atom arrays: circuit
chunking, crossed-AOD conflict graphs, a fidelity-proxy cost model, the layout
MDP, classical planners, and a wire protocol for remote policies."""

from .circuit import (
    ChunkedCircuit,
    QasmError,
    RandomPauliSpec,
    chunk_asap,
    circuit_from_json,
    gen_random_pauli_trotter,
    load_circuit,
    parse_qasm,
    playable_atoms,
)
from .conflict import (
    ActiveSet,
    ConflictGraph,
    Move,
    active_participants,
    build_conflict_graph,
    conflicts,
    estimate_moves,
    greedy_color,
    moves_between,
    schedule_moves,
)
from .cost import (
    CongestionError,
    CostParams,
    MoveCost,
    gate_cost,
    layout_cost,
    pair_adjacent_state,
    step_reward,
)
from .env import (
    ChunkAction,
    EnvState,
    EpisodeResult,
    InvalidActionError,
    Observation,
    Transition,
    count_layout_changes,
    observe,
    reset,
    run_episode,
    step,
)
from .geometry import (
    CapacityError,
    Cell,
    CollisionError,
    Grid,
    Layout,
    apply_moves,
    default_grid,
    distance,
    initial_layout,
)
from .planners import (
    AnnealConfig,
    SearchBoundExceeded,
    anneal_policy,
    brute_force_optimum,
    greedy_policy,
    identity_policy,
    random_policy,
)

__version__ = "0.1.0"
