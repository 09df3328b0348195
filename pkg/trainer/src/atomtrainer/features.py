"""Input builders for the policy: positional trap embeddings, the gate and
move sequence inputs, their attention masks, and the static per-cell scores.

Every sequence fed to a transformer is `n_atoms` atom rows followed by
`n_grids` trap rows. Atom rows are differences of trap embeddings (where the
atom's partner sits, or where it came from); rows that carry no information
are exactly zero and the attention mask silences them.
"""

from __future__ import annotations

from functools import lru_cache

import torch
from torch import nn

Cell = tuple[int, int]

NEG_INF = float("-inf")


def effective_cell(positions: list[Cell], plan: dict[int, Cell], atom: int) -> Cell:
    return plan.get(atom, positions[atom])


def select_chunks(chunks: list[list[list[int]]], q0: int, k: int) -> list[list[list[int]]]:
    """The first k upcoming chunks that gate q0 (fewer if the tail runs out)."""
    picked = []
    for chunk in chunks:
        if any(q0 in gate for gate in chunk):
            picked.append(chunk)
            if len(picked) == k:
                break
    return picked


class TrapEmbedding(nn.Module):
    """Learnable embedding per trap cell.

    Fixed-grid mode indexes a flat row-major table; factorized mode
    concatenates row and column tables so one model serves any grid up to the
    configured caps (the transfer setting).
    """

    def __init__(self, dim: int, rows: int, cols: int, factorized: bool = False):
        super().__init__()
        self.dim = dim
        self.factorized = factorized
        if factorized:
            if dim % 2:
                raise ValueError("factorized trap embedding needs an even dim")
            self.row_table = nn.Embedding(rows, dim // 2)
            self.col_table = nn.Embedding(cols, dim // 2)
        else:
            self.table = nn.Embedding(rows * cols, dim)
        self.rows = rows
        self.cols = cols

    def forward(self, cells: torch.Tensor, cols: int) -> torch.Tensor:
        """cells: (..., 2) integer (col, row) pairs; cols: live grid width."""
        if self.factorized:
            return torch.cat(
                [self.row_table(cells[..., 1]), self.col_table(cells[..., 0])], dim=-1
            )
        flat = cells[..., 1] * cols + cells[..., 0]
        return self.table(flat)


def cells_tensor(cells: list[Cell]) -> torch.Tensor:
    return torch.tensor(cells, dtype=torch.long)


def grid_cells(rows: int, cols: int) -> list[Cell]:
    return [(c, r) for r in range(rows) for c in range(cols)]


@lru_cache(maxsize=64)
def grid_cells_tensor(rows: int, cols: int) -> torch.Tensor:
    return cells_tensor(grid_cells(rows, cols))


def gates_chunk_input(
    embed: TrapEmbedding,
    positions: list[Cell],
    plan: dict[int, Cell],
    chunk: list[list[int]],
    q0: int,
    rows: int,
    cols: int,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Sequence for one chunk: atom rows point from each non-PA-gate atom to
    its partner (planned layout), trap rows point from each trap to q0's
    planned cell. Returns (sequence, atom-row-nonzero mask)."""
    n_atoms = len(positions)
    partner = {}
    found_pa = False
    for gate in chunk:
        a, b = gate
        if q0 in (a, b):
            found_pa = True  # the acting atom's own gate contributes no rows
            continue
        partner[a] = b
        partner[b] = a
    if not found_pa:
        raise ValueError(f"atom {q0} is not gated in this chunk")

    planned = [effective_cell(positions, plan, q) for q in range(n_atoms)]
    planned_t = cells_tensor(planned)
    atom_rows = torch.zeros(n_atoms, embed.dim)
    nonzero = torch.zeros(n_atoms, dtype=torch.bool)
    if partner:
        atoms = sorted(partner)
        own = embed(planned_t[atoms], cols)
        other = embed(planned_t[[partner[q] for q in atoms]], cols)
        atom_rows[atoms] = own - other
        nonzero[atoms] = True

    anchor = embed(planned_t[q0], cols)
    grid_rows = embed(grid_cells_tensor(rows, cols), cols) - anchor
    return torch.cat([atom_rows, grid_rows], dim=0), nonzero


def moves_input(
    embed: TrapEmbedding,
    positions: list[Cell],
    plan: dict[int, Cell],
    q0: int,
    rows: int,
    cols: int,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Sequence for the planned moves: atom rows point from each atom's
    current cell to its planned cell (zero when unmoved), trap rows point
    from each trap to q0's current cell."""
    n_atoms = len(positions)
    current_t = cells_tensor(positions)
    atom_rows = torch.zeros(n_atoms, embed.dim)
    nonzero = torch.zeros(n_atoms, dtype=torch.bool)
    moved = sorted(q for q, cell in plan.items() if cell != positions[q])
    if moved:
        planned_t = cells_tensor([plan[q] for q in moved])
        atom_rows[moved] = embed(planned_t, cols) - embed(current_t[moved], cols)
        nonzero[moved] = True

    anchor = embed(current_t[q0], cols)
    grid_rows = embed(grid_cells_tensor(rows, cols), cols) - anchor
    return torch.cat([atom_rows, grid_rows], dim=0), nonzero


def build_attention_mask(n_atoms: int, n_grids: int, atom_nonzero: torch.Tensor) -> torch.Tensor:
    """Additive mask (S, S): every position may read itself, trap positions
    may read nonzero atom positions, nothing else flows."""
    size = n_atoms + n_grids
    allowed = torch.eye(size, dtype=torch.bool)
    allowed[n_atoms:, :n_atoms] = atom_nonzero.unsqueeze(0)
    mask = torch.zeros(size, size)
    mask[~allowed] = NEG_INF
    return mask


def occupancy_mask(
    positions: list[Cell], plan: dict[int, Cell], q0: int, rows: int, cols: int
) -> torch.Tensor:
    """Boolean (n_grids,): True where q0 may land; cells held by other atoms
    in the planned layout are off-limits, q0's own current cell stays legal."""
    free = torch.ones(rows * cols, dtype=torch.bool)
    for q in range(len(positions)):
        if q == q0:
            continue
        c, r = effective_cell(positions, plan, q)
        free[r * cols + c] = False
    return free


class MlpMixerBoard(nn.Module):
    """Board summary: one-hot atom occupancy per cell, a linear patch
    embedding, `depth` mixer blocks (token mix across cells, channel mix
    across features), then a mean pool."""

    def __init__(self, n_atoms: int, n_cells: int, dim: int, depth: int = 1):
        super().__init__()
        self.n_atoms = n_atoms
        self.n_cells = n_cells
        self.patch = nn.Linear(n_atoms + 1, dim)
        self.blocks = nn.ModuleList()
        for _ in range(depth):
            self.blocks.append(nn.ModuleDict({
                "token_norm": nn.LayerNorm(dim),
                "token_mix": nn.Sequential(
                    nn.Linear(n_cells, n_cells), nn.GELU(), nn.Linear(n_cells, n_cells),
                ),
                "channel_norm": nn.LayerNorm(dim),
                "channel_mix": nn.Sequential(
                    nn.Linear(dim, 2 * dim), nn.GELU(), nn.Linear(2 * dim, dim),
                ),
            }))

    def forward(self, board: torch.Tensor) -> torch.Tensor:
        """board: (..., n_cells, n_atoms+1) one-hot occupancy -> (..., dim)."""
        x = self.patch(board)
        for block in self.blocks:
            t = block["token_norm"](x).transpose(-2, -1)
            x = x + block["token_mix"](t).transpose(-2, -1)
            x = x + block["channel_mix"](block["channel_norm"](x))
        return x.mean(dim=-2)


def board_one_hot(positions: list[Cell], plan: dict[int, Cell],
                  n_atoms: int, rows: int, cols: int) -> torch.Tensor:
    """(n_cells, n_atoms+1): column q marks atom q's planned cell, the last
    column marks empty traps."""
    board = torch.zeros(rows * cols, n_atoms + 1)
    occupied = set()
    for q in range(n_atoms):
        c, r = effective_cell(positions, plan, q)
        board[r * cols + c, q] = 1.0
        occupied.add(r * cols + c)
    for j in range(rows * cols):
        if j not in occupied:
            board[j, n_atoms] = 1.0
    return board


class StaticFeatures(nn.Module):
    """Per-cell preference scores from the step index, the acting atom's
    identity, and the planned board; independent of the circuit."""

    def __init__(self, n_atoms: int, rows: int, cols: int,
                 time_dim: int = 40, atom_dim: int = 40, board_dim: int = 10,
                 mixer_depth: int = 1, t_max: int = 512, hidden: int = 64):
        super().__init__()
        self.t_max = t_max
        self.time_table = nn.Embedding(t_max, time_dim)
        self.atom_table = nn.Embedding(n_atoms, atom_dim)
        self.board = MlpMixerBoard(n_atoms, rows * cols, board_dim, depth=mixer_depth)
        self.head = nn.Sequential(
            nn.Linear(time_dim + atom_dim + board_dim, hidden),
            nn.GELU(),
            nn.Linear(hidden, rows * cols),
        )
        self.n_atoms = n_atoms
        self.rows = rows
        self.cols = cols

    def forward_batch(self, ts: torch.Tensor, q0s: torch.Tensor,
                      boards: torch.Tensor) -> torch.Tensor:
        """ts, q0s: (B,) long; boards: (B, n_cells, n_atoms+1) -> (B, n_grid)."""
        e = torch.cat([
            self.time_table(ts.clamp(max=self.t_max - 1)),
            self.atom_table(q0s),
            self.board(boards),
        ], dim=-1)
        return self.head(e)

    def forward(self, t: int, q0: int, positions: list[Cell], plan: dict[int, Cell]) -> torch.Tensor:
        board = board_one_hot(positions, plan, self.n_atoms, self.rows, self.cols)
        return self.forward_batch(
            torch.tensor([t]), torch.tensor([q0]), board.unsqueeze(0),
        )[0]
