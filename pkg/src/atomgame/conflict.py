"""Crossed-AOD conflict graphs for parallel atom moves.

A dynamic tweezer grid picks up whole rows and columns at once, so two moves
can share one parallel step only if neither axis merges/splits a picked row or
column (many-to-one) and no two picked rows or columns swap order in flight
(crossing). Moves that violate either constraint get an edge in the conflict
graph; color classes of that graph are valid parallel move groups.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

from .geometry import Cell, Layout


class Move(NamedTuple):
    atom: int
    src: Cell
    dst: Cell


@dataclass(frozen=True)
class ActiveSet:
    """Atoms engaged by a reconfiguration: the movers plus bystanders parked
    at an active-column/active-row intersection, where the crossed AOD traps
    them."""

    columns: frozenset[int]
    rows: frozenset[int]
    atoms: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.atoms)


def moves_between(s: Layout, s2: Layout) -> list[Move]:
    """Atoms whose cell differs between the two layouts, ascending id."""
    if s.n_atoms != s2.n_atoms:
        raise ValueError("layouts differ in atom count")
    return [
        Move(q, s.positions[q], s2.positions[q])
        for q in range(s.n_atoms)
        if s.positions[q] != s2.positions[q]
    ]


def active_participants(s: Layout, s2: Layout) -> ActiveSet:
    movers = moves_between(s, s2)
    cols: set[int] = set()
    rows: set[int] = set()
    for _, (c1, r1), (c2, r2) in movers:
        cols.update((c1, c2))
        rows.update((r1, r2))
    atoms = {m.atom for m in movers}
    for q in range(s.n_atoms):
        if q in atoms:
            continue
        c, r = s.positions[q]
        if c in cols and r in rows:
            atoms.add(q)
    return ActiveSet(frozenset(cols), frozenset(rows), tuple(sorted(atoms)))


def _axis_conflict(a_src: int, a_dst: int, b_src: int, b_dst: int) -> bool:
    if a_src == b_src:
        return a_dst != b_dst  # one picked line cannot split
    if a_dst == b_dst:
        return True  # two picked lines cannot merge
    return (a_src < b_src) != (a_dst < b_dst)  # lines may not cross in flight


def conflicts(m1: Move, m2: Move) -> bool:
    """True iff the two moves cannot share one parallel AOD step."""
    col = _axis_conflict(m1.src[0], m1.dst[0], m2.src[0], m2.dst[0])
    row = _axis_conflict(m1.src[1], m1.dst[1], m2.src[1], m2.dst[1])
    return col or row


class ConflictGraph:
    """Undirected graph on moving atoms; immutable after construction."""

    def __init__(self, vertices: list[int], edges: list[tuple[int, int]]):
        self.vertices = tuple(sorted(vertices))
        self._adj: dict[int, set[int]] = {v: set() for v in self.vertices}
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-loop on {a}")
            self._adj[a].add(b)
            self._adj[b].add(a)

    def neighbors(self, v: int) -> set[int]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def max_degree(self) -> int:
        return max((len(n) for n in self._adj.values()), default=0)

    def edges(self) -> list[tuple[int, int]]:
        return sorted(
            (min(a, b), max(a, b)) for a in self.vertices for b in self._adj[a] if a < b
        )

    @property
    def n_edges(self) -> int:
        return sum(len(n) for n in self._adj.values()) // 2

    def has_edge(self, a: int, b: int) -> bool:
        return b in self._adj.get(a, ())

    def dumps(self) -> str:
        """Debug dump as a JSON edge list."""
        obj = {"vertices": list(self.vertices), "edges": [list(e) for e in self.edges()]}
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def build_conflict_graph(moves: list[Move]) -> ConflictGraph:
    edges = [
        (moves[i].atom, moves[j].atom)
        for i in range(len(moves))
        for j in range(i + 1, len(moves))
        if conflicts(moves[i], moves[j])
    ]
    return ConflictGraph([m.atom for m in moves], edges)


def greedy_color(g: ConflictGraph) -> dict[int, int]:
    """Proper coloring with at most max_degree+1 colors: vertices in
    descending-degree order (ties by id), each taking the smallest free color."""
    order = sorted(g.vertices, key=lambda v: (-g.degree(v), v))
    coloring: dict[int, int] = {}
    for v in order:
        taken = {coloring[u] for u in g.neighbors(v) if u in coloring}
        color = 0
        while color in taken:
            color += 1
        coloring[v] = color
    return coloring


def estimate_moves(g: ConflictGraph, moves: list[Move]) -> int:
    """Parallel-move count under a divide-and-conquer resort with ample swap
    space: logarithmic in the conflict edge count, at least one move whenever
    anything moves at all."""
    if not moves:
        return 0
    return max(1, math.ceil(math.log2(1 + g.n_edges)))


def schedule_moves(s: Layout, s2: Layout) -> list[list[Move]]:
    """Concrete parallel schedule: one group per color class, each group
    pairwise conflict-free; applying groups in order turns s into s2."""
    moves = moves_between(s, s2)
    if not moves:
        return []
    g = build_conflict_graph(moves)
    coloring = greedy_color(g)
    n_groups = max(coloring.values()) + 1
    groups: list[list[Move]] = [[] for _ in range(n_groups)]
    for m in moves:
        groups[coloring[m.atom]].append(m)
    return [sorted(group) for group in groups]
