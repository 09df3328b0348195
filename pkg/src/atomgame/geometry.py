"""Trap-grid geometry and atom layouts for the storage region.

Cells are addressed as (column, row) pairs in lattice units and flattened
row-major (j = row * cols + col) when a scalar id is needed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

Cell = tuple[int, int]  # (column, row)


class CapacityError(ValueError):
    """More atoms than traps on the grid."""


class CollisionError(ValueError):
    """Two atoms assigned to the same trap."""

    def __init__(self, cell: Cell):
        super().__init__(f"two atoms on cell {cell}")
        self.cell = cell


@dataclass(frozen=True)
class Grid:
    """Rectangular grid of static traps, with physical lattice spacing."""

    rows: int
    cols: int
    spacing: float = 1.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one row and one column")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def contains(self, cell: Cell) -> bool:
        c, r = cell
        return 0 <= c < self.cols and 0 <= r < self.rows

    def flat_index(self, cell: Cell) -> int:
        if not self.contains(cell):
            raise ValueError(f"cell {cell} out of bounds for {self.rows}x{self.cols} grid")
        c, r = cell
        return r * self.cols + c

    def cell_at(self, index: int) -> Cell:
        if not 0 <= index < self.n_cells:
            raise ValueError(f"flat index {index} out of range [0, {self.n_cells})")
        return (index % self.cols, index // self.cols)

    def all_cells(self) -> list[Cell]:
        """All cells in row-major (flat index) order."""
        return [(c, r) for r in range(self.rows) for c in range(self.cols)]

    def neighbors4(self, cell: Cell) -> list[Cell]:
        """In-bounds 4-neighbors, row-major order."""
        c, r = cell
        cand = [(c, r - 1), (c - 1, r), (c + 1, r), (c, r + 1)]
        return [x for x in cand if self.contains(x)]


@dataclass(frozen=True)
class Layout:
    """Assignment of atoms 0..N-1 to distinct cells; entry q is atom q's cell."""

    positions: tuple[Cell, ...]

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    def cell_of(self, atom: int) -> Cell:
        return self.positions[atom]

    def occupied(self) -> set[Cell]:
        return set(self.positions)

    def validate(self, grid: Grid) -> None:
        if self.n_atoms > grid.n_cells:
            raise CapacityError(f"{self.n_atoms} atoms exceed {grid.n_cells} traps")
        seen: set[Cell] = set()
        for cell in self.positions:
            if not grid.contains(cell):
                raise ValueError(f"cell {cell} out of bounds for {grid.rows}x{grid.cols} grid")
            if cell in seen:
                raise CollisionError(cell)
            seen.add(cell)


def initial_layout(grid: Grid, n_atoms: int, mode: str = "random", seed: int = 0) -> Layout:
    """Seed an episode's starting layout.

    mode "random": uniform assignment of atoms to distinct traps.
    mode "rowmajor": atom q sits at flat cell q.
    """
    if n_atoms > grid.n_cells:
        raise CapacityError(f"{n_atoms} atoms exceed {grid.n_cells} traps")
    if mode == "rowmajor":
        cells = [grid.cell_at(q) for q in range(n_atoms)]
    elif mode == "random":
        rng = random.Random(seed)
        cells = [grid.cell_at(j) for j in rng.sample(range(grid.n_cells), n_atoms)]
    else:
        raise ValueError(f"unknown layout mode {mode!r}")
    return Layout(tuple(cells))


def apply_moves(layout: Layout, targets: dict[int, Cell], grid: Grid) -> Layout:
    """Move the keyed atoms to their target cells; everyone else stays.

    Targets must be pairwise distinct and must not land on a cell still held
    by a non-moving atom (cells vacated by other movers are fine).
    """
    if not targets:
        return layout
    positions = list(layout.positions)
    staying = {cell for q, cell in enumerate(positions) if q not in targets}
    seen: set[Cell] = set()
    for atom, cell in targets.items():
        if not 0 <= atom < len(positions):
            raise ValueError(f"unknown atom {atom}")
        if not grid.contains(cell):
            raise ValueError(f"cell {cell} out of bounds for {grid.rows}x{grid.cols} grid")
        if cell in seen or cell in staying:
            raise CollisionError(cell)
        seen.add(cell)
        positions[atom] = cell
    return Layout(tuple(positions))


def distance(v: Cell, w: Cell, spacing: float = 1.0) -> float:
    """Euclidean distance between two cells in physical units."""
    return math.hypot(v[0] - w[0], v[1] - w[1]) * spacing


def layout_to_json(layout: Layout, grid: Grid) -> dict:
    return {
        "rows": grid.rows,
        "cols": grid.cols,
        "positions": [[c, r] for c, r in layout.positions],
    }


def layout_from_json(obj: dict) -> tuple[Layout, Grid]:
    grid = Grid(rows=int(obj["rows"]), cols=int(obj["cols"]))
    layout = Layout(tuple((int(c), int(r)) for c, r in obj["positions"]))
    layout.validate(grid)
    return layout, grid


# Grid sizes used by the bundled benchmark experiments, keyed by qubit count.
_GRID_TABLE = [
    (14, (4, 10)),
    (30, (7, 10)),
    (50, (5, 20)),
    (100, (10, 20)),
]


def default_grid(n_qubits: int, spacing: float = 1.0) -> Grid:
    """Pick a storage grid for a circuit of the given width.

    Follows the benchmark table for up to 100 qubits; beyond that, keeps a
    20-wide grid with roughly 2x as many traps as atoms.
    """
    for limit, (rows, cols) in _GRID_TABLE:
        if n_qubits <= limit:
            return Grid(rows=rows, cols=cols, spacing=spacing)
    rows = math.ceil(2 * n_qubits / 20)
    return Grid(rows=rows, cols=20, spacing=spacing)
