"""Command-line entry point: generate circuits, compile them into layout
schedules with a chosen planner, sweep a benchmark matrix, or serve episodes
to a remote policy."""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import io
import json
import os
import signal
import sys
import time
from dataclasses import dataclass

from . import env as atomenv
from . import protocol
from .circuit import ChunkedCircuit, RandomPauliSpec, chunk_asap, gen_random_pauli_trotter, load_circuit
from .conflict import schedule_moves
from .cost import CostParams, params_from_file
from .env import EpisodeResult, Transition, count_layout_changes, run_episode, write_trace
from .geometry import Grid, default_grid, layout_to_json
from .planners import AnnealConfig, anneal_policy, greedy_policy, identity_policy, random_policy

CSV_COLUMNS = [
    "circuit", "n_qubits", "chunks", "planner", "seed",
    "total_reward", "baseline_cost", "reduction_pct", "layout_changes", "wall_ms",
]

PLANNERS = ("identity", "random", "greedy", "anneal", "remote")


@dataclass
class RunReport:
    circuit: str
    n_qubits: int
    chunks: int
    planner: str
    seed: int
    total_reward: float
    baseline_cost: float
    reduction_pct: float
    layout_changes: int
    wall_ms: float

    def to_json(self, include_timing: bool = True) -> dict:
        obj = {
            "circuit": self.circuit,
            "n_qubits": self.n_qubits,
            "chunks": self.chunks,
            "planner": self.planner,
            "seed": self.seed,
            "total_reward": self.total_reward,
            "baseline_cost": self.baseline_cost,
            "reduction_pct": self.reduction_pct,
            "layout_changes": self.layout_changes,
        }
        if include_timing:
            obj["wall_ms"] = self.wall_ms
        return obj

    def csv_row(self) -> list[str]:
        return [str(self.to_json()[col]) for col in CSV_COLUMNS]


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        rows, cols = text.lower().split("x")
        return int(rows), int(cols)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must look like 7x10, got {text!r}") from exc


def _add_cost_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--params", help="JSON file with cost parameters (flags override)")
    parser.add_argument("--alpha", type=float, help="inverse coherence time (default 0.02)")
    parser.add_argument("--beta", type=float, help="per-touch loss (default 0.002)")
    parser.add_argument("--epsilon", type=float, help="touched fraction per move (default 0.5)")
    parser.add_argument("--tg", type=float, help="inter-zone transfer time (default 10)")
    parser.add_argument("--gamma-accel", type=float, help="acceleration constant (default 1)")
    parser.add_argument("--spacing", type=float, default=1.0, help="lattice spacing (default 1)")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid", type=_parse_grid, help="storage grid as RxC (default per qubit count)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--window", type=int, default=atomenv.DEFAULT_WINDOW,
                        help="playable-atom window size")
    parser.add_argument("--layout", choices=("random", "rowmajor"), default="random",
                        help="initial layout mode")
    parser.add_argument("--p-move", type=float, default=0.2, help="random planner move probability")
    parser.add_argument("--cap", type=int, default=8, help="greedy planner candidate cells")
    parser.add_argument("--anneal-iterations", type=int, default=40)
    parser.add_argument("--anneal-proposals", type=int, default=8)
    parser.add_argument("--anneal-t0", type=float, default=0.5)
    parser.add_argument("--anneal-cooling", type=float, default=0.9)
    _add_cost_flags(parser)


def _build_params(args, n_atoms: int) -> CostParams:
    if args.params:
        params = params_from_file(args.params, n_atoms=n_atoms).for_atoms(n_atoms)
    else:
        params = CostParams(n_atoms=n_atoms)
    overrides = {
        "alpha": args.alpha,
        "beta": args.beta,
        "epsilon": args.epsilon,
        "t_gate": args.tg,
        "gamma_accel": args.gamma_accel,
    }
    fields = {k: v for k, v in overrides.items() if v is not None}
    if fields:
        params = CostParams(**{**params.to_json(), **fields, "n_atoms": n_atoms})
    return params


def _build_grid(args, n_qubits: int) -> Grid:
    if args.grid:
        rows, cols = args.grid
        return Grid(rows=rows, cols=cols, spacing=args.spacing)
    return default_grid(n_qubits, spacing=args.spacing)


def _make_policy(name: str, params: CostParams, args, seed: int):
    if name == "identity":
        return identity_policy()
    if name == "random":
        return random_policy(args.p_move, seed=seed)
    if name == "greedy":
        return greedy_policy(params, cap=args.cap)
    if name == "anneal":
        config = AnnealConfig(
            proposals=args.anneal_proposals,
            t_initial=args.anneal_t0,
            cooling=args.anneal_cooling,
            iterations=args.anneal_iterations,
            seed=seed,
        )
        return anneal_policy(params, config, window=args.window)
    raise ValueError(f"unknown planner {name!r}")


def _run_one(circuit: ChunkedCircuit, name: str, planner: str, args, seed: int):
    grid = _build_grid(args, circuit.n_qubits)
    params = _build_params(args, circuit.n_qubits)
    state, _ = atomenv.reset(
        circuit, grid, params, window=args.window, seed=seed, layout_mode=args.layout,
    )
    policy = _make_policy(planner, params, args, seed)
    start = time.perf_counter()
    result = run_episode(state, policy)
    wall_ms = (time.perf_counter() - start) * 1000.0
    return _report_from(result, name, circuit, planner, seed, wall_ms), result, state


def _report_from(result: EpisodeResult, name: str, circuit: ChunkedCircuit,
                 planner: str, seed: int, wall_ms: float) -> RunReport:
    return RunReport(
        circuit=name,
        n_qubits=circuit.n_qubits,
        chunks=circuit.n_chunks,
        planner=planner,
        seed=seed,
        total_reward=result.total_reward,
        baseline_cost=result.baseline_cost,
        reduction_pct=result.reduction_pct,
        layout_changes=count_layout_changes(result.transitions),
        wall_ms=wall_ms,
    )


def _schedule_json(state, transitions: list[Transition], report: RunReport) -> dict:
    layouts = [state.s0] + [tr.s_next for tr in transitions]
    groups = []
    for prev, cur in zip(layouts, layouts[1:]):
        step_groups = schedule_moves(prev, cur)
        groups.append([
            [{"atom": m.atom, "from": list(m.src), "to": list(m.dst)} for m in group]
            for group in step_groups
        ])
    return {
        "report": report.to_json(include_timing=False),
        "layouts": [layout_to_json(l, state.grid) for l in layouts],
        "move_groups": groups,
    }


def _emit_report(report: RunReport, fmt: str, out=None) -> None:
    out = out if out is not None else sys.stdout
    if fmt == "csv":
        writer = csv.writer(out)
        writer.writerow(CSV_COLUMNS)
        writer.writerow(report.csv_row())
    else:
        json.dump(report.to_json(), out, indent=2, sort_keys=True)
        out.write("\n")


# ---------------------------------------------------------------------------
# Subcommands

def cmd_gen(args) -> int:
    spec = RandomPauliSpec(
        n_qubits=args.qubits, n_terms=args.terms, trotter_steps=args.steps, seed=args.seed,
    )
    circuit = chunk_asap(gen_random_pauli_trotter(spec), spec.n_qubits)
    text = circuit.dumps() + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _remote_episode(circuit: ChunkedCircuit, args):
    """Serve exactly one pinned session; the remote policy plays the episode.

    The reset payload's circuit/grid/params fields are ignored in favor of the
    compile flags, so clients may send a bare {"op":"reset"}.
    """
    grid = _build_grid(args, circuit.n_qubits)
    params = _build_params(args, circuit.n_qubits)
    transitions: list[Transition] = []
    holder = {}

    def record(tr: Transition):
        transitions.append(tr)

    def pinned(payload):
        state, obs = atomenv.reset(
            circuit, grid, params,
            window=args.window, seed=args.seed, layout_mode=args.layout,
        )
        transitions.clear()
        holder["state"] = state
        return state, obs

    if args.stdio:
        protocol.serve_stream(sys.stdin, sys.stdout, pinned, on_transition=record)
    else:
        print(f"serving one episode on {args.host}:{args.port}", file=sys.stderr)
        protocol.serve_one_connection(args.host, args.port, pinned, on_transition=record)
    state = holder.get("state")
    if state is None or not state.done:
        raise RuntimeError("remote policy did not complete an episode")
    total = sum(tr.reward for tr in transitions)
    baseline = state.baseline_total
    reduction = 100.0 * total / baseline if baseline > 0 else 0.0
    return EpisodeResult(transitions, total, baseline, reduction), state


def cmd_compile(args) -> int:
    circuit = load_circuit(args.circuit)
    name = os.path.basename(args.circuit)
    if args.planner == "remote":
        start = time.perf_counter()
        result, state = _remote_episode(circuit, args)
        wall_ms = (time.perf_counter() - start) * 1000.0
        report = _report_from(result, name, circuit, "remote", args.seed, wall_ms)
    else:
        report, result, state = _run_one(circuit, name, args.planner, args, args.seed)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(_schedule_json(state, result.transitions, report), fh,
                      sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    if args.trace:
        write_trace(result.transitions, args.trace)
    # a stdio remote session owns stdout for the wire; report on stderr then
    report_stream = sys.stderr if args.planner == "remote" and args.stdio else None
    _emit_report(report, args.format, out=report_stream)
    return 0


def _bench_task(task) -> tuple[int, list[str], str | None]:
    index, path, planner, seed, args = task
    try:
        circuit = load_circuit(path)
        report, _, _ = _run_one(circuit, os.path.basename(path), planner, args, seed)
        return index, report.csv_row(), None
    except Exception as exc:  # noqa: BLE001 - row-level failures land in the report
        row = [os.path.basename(path), "", "", planner, str(seed), "", "", "", "", ""]
        return index, row, f"{type(exc).__name__}: {exc}"


def cmd_bench(args) -> int:
    planners = [p.strip() for p in args.planners.split(",") if p.strip()]
    seeds = [int(s) for s in args.seeds.split(",")]
    for p in planners:
        if p not in PLANNERS or p == "remote":
            print(f"bench does not support planner {p!r}", file=sys.stderr)
            return 1
    tasks = [
        (i, path, planner, seed, args)
        for i, (path, planner, seed) in enumerate(
            (path, planner, seed)
            for path in args.circuits
            for planner in planners
            for seed in seeds
        )
    ]
    results: list[tuple[int, list[str], str | None]] = []
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bench_task, tasks))
    else:
        results = [_bench_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    failures = 0
    for _, row, error in results:
        writer.writerow(row)
        if error is not None:
            failures += 1
            print(f"row failed: {error}", file=sys.stderr)
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 1 if failures else 0


def cmd_serve(args) -> int:
    if args.stdio:
        protocol.serve_stream(sys.stdin, sys.stdout)
        return 0
    try:
        server = protocol.serve_tcp(args.host, args.port)
    except OSError as exc:
        print(f"cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return 1
    stop = lambda *_: server.shutdown()  # noqa: E731
    signal.signal(signal.SIGTERM, stop)
    print(f"serving on {args.host}:{server.port}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atomgame", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a random two-local Trotter circuit")
    p_gen.add_argument("--qubits", type=int, default=40)
    p_gen.add_argument("--terms", type=int, default=40)
    p_gen.add_argument("--steps", type=int, default=4)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", help="output path (default stdout)")
    p_gen.set_defaults(func=cmd_gen)

    p_compile = sub.add_parser("compile", help="plan layouts for a circuit and emit a schedule")
    p_compile.add_argument("--circuit", required=True, help=".qasm or native JSON circuit")
    p_compile.add_argument("--planner", choices=PLANNERS, default="anneal")
    p_compile.add_argument("--out", help="schedule JSON output path")
    p_compile.add_argument("--trace", help="episode trace JSONL output path")
    p_compile.add_argument("--format", choices=("json", "csv"), default="json")
    p_compile.add_argument("--port", type=int, default=7741, help="remote planner port")
    p_compile.add_argument("--host", default="127.0.0.1")
    p_compile.add_argument("--stdio", action="store_true", help="remote planner over stdio")
    _add_run_flags(p_compile)
    p_compile.set_defaults(func=cmd_compile)

    p_bench = sub.add_parser("bench", help="run a planner x circuit x seed matrix to CSV")
    p_bench.add_argument("--circuits", nargs="+", required=True)
    p_bench.add_argument("--planners", default="identity,greedy,anneal")
    p_bench.add_argument("--seeds", default="0")
    p_bench.add_argument("--out", help="CSV output path (default stdout)")
    p_bench.add_argument("--jobs", type=int, default=1)
    _add_run_flags(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_serve = sub.add_parser("serve", help="serve episodes over the wire protocol")
    p_serve.add_argument("--port", type=int, default=7741)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--stdio", action="store_true")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
