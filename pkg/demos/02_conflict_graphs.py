"""Walkthrough: which moves can share one parallel tweezer step.

The dynamic trap grid picks up whole rows and columns, so parallel moves are
constrained: picked lines cannot merge or split (many-to-one) and cannot pass
each other in flight (ordering). Illegal pairs become edges of a conflict
graph; its coloring yields the parallel move groups.
"""

from atomgame import (
    Layout,
    Move,
    build_conflict_graph,
    conflicts,
    estimate_moves,
    greedy_color,
    moves_between,
    schedule_moves,
)

# Two atoms at (2,0) and (1,2); four candidate parallel destinations.
cases = [
    ((6, 0), (5, 1), "parallel translation-ish"),
    ((6, 4), (5, 1), "row order inverts in flight"),
    ((5, 1), (4, 4), "order preserved on both axes"),
    ((5, 1), (5, 4), "both land in column 5: a merge"),
]
for dst1, dst2, why in cases:
    m1, m2 = Move(0, (2, 0), dst1), Move(1, (1, 2), dst2)
    verdict = "conflict" if conflicts(m1, m2) else "ok in parallel"
    print(f"(2,0)->{dst1} with (1,2)->{dst2}: {verdict:14s} ({why})")

# A reconfiguration: three atoms leaving one column for three different
# columns pairwise-conflict (the picked column would have to split).
s = Layout(((0, 0), (0, 1), (0, 2), (3, 3)))
s2 = Layout(((1, 0), (2, 1), (3, 2), (3, 3)))
moves = moves_between(s, s2)
graph = build_conflict_graph(moves)
print("\nmovers:", [m.atom for m in moves])
print("conflict edges:", graph.edges())
print("greedy coloring:", greedy_color(graph))
print("estimated parallel moves:", estimate_moves(graph, moves))

print("\nexecutable schedule (one group per color):")
for i, group in enumerate(schedule_moves(s, s2)):
    print(f"  group {i}: " + ", ".join(f"atom {m.atom} {m.src}->{m.dst}" for m in group))
