"""Circuit ingestion: QASM parsing, random two-local Trotter generation,
ASAP chunking into parallel two-qubit gate layers.

Only the two-qubit gate skeleton matters downstream, so one-qubit gates,
barriers and measurements are dropped at parse time.
"""

from __future__ import annotations

import itertools
import json
import random
import re
from dataclasses import dataclass

GatePair = tuple[int, int]  # normalized q1 < q2


class QasmError(ValueError):
    """Syntax or semantic error in a QASM source, with 1-based position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class ChunkedCircuit:
    """Ordered parallel layers of two-qubit gates on pairwise-disjoint qubits."""

    n_qubits: int
    chunks: tuple[tuple[GatePair, ...], ...]

    def __post_init__(self):
        has_gates = any(self.chunks)
        for i, chunk in enumerate(self.chunks):
            if not chunk and has_gates:
                raise ValueError(f"chunk {i} is empty in a circuit with gates")
            used: set[int] = set()
            for q1, q2 in chunk:
                if not (0 <= q1 < q2 < self.n_qubits):
                    raise ValueError(f"bad gate pair ({q1},{q2}) for {self.n_qubits} qubits")
                if q1 in used or q2 in used:
                    raise ValueError(f"chunk {i} reuses a qubit: ({q1},{q2})")
                used.update((q1, q2))

    @property
    def n_chunks(self) -> int:
        return len(self.chunks)

    def gates(self) -> list[GatePair]:
        return [g for chunk in self.chunks for g in chunk]

    def to_json(self) -> dict:
        return {"n_qubits": self.n_qubits, "chunks": [[list(g) for g in c] for c in self.chunks]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


def normalize_pair(q1: int, q2: int) -> GatePair:
    if q1 == q2:
        raise ValueError(f"gate acts twice on qubit {q1}")
    return (q1, q2) if q1 < q2 else (q2, q1)


# ---------------------------------------------------------------------------
# QASM 2.0 subset parser

_QREG_RE = re.compile(r"^qreg\s+([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")
_CREG_RE = re.compile(r"^creg\s+([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")
_OPERAND_RE = re.compile(r"^([A-Za-z_]\w*)\s*(?:\[\s*(\d+)\s*\])?$")
_CALL_RE = re.compile(r"^([A-Za-z_]\w*)\s*(\([^()]*\))?\s*(.*)$", re.DOTALL)


def _statements(text: str):
    """Yield (statement, line, col) with comments stripped; positions are of
    the statement's first non-space character."""
    buf: list[str] = []
    start: tuple[int, int] | None = None
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "/" and i + 1 < n and text[i + 1] == "/":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == ";":
            yield "".join(buf).strip(), (start or (line, col))[0], (start or (line, col))[1]
            buf, start = [], None
        elif ch == "\n":
            buf.append(" ")
            line += 1
            col = 0
        else:
            if start is None and not ch.isspace():
                start = (line, col)
            buf.append(ch)
        col += 1
        i += 1
    tail = "".join(buf).strip()
    if tail:
        l, c = start or (line, col)
        raise QasmError("statement missing terminating ';'", l, c)


def parse_qasm(text: str) -> tuple[list[GatePair], int]:
    """Extract the two-qubit gate sequence (program order) and qubit count.

    Recognized statements: OPENQASM header, include (ignored), exactly one
    qreg, creg (ignored), cx/cz (kept), one-operand gate calls, measure and
    barrier (all ignored). Anything else raises QasmError.
    """
    qreg: tuple[str, int] | None = None
    gates: list[GatePair] = []

    def resolve(operand: str, line: int, col: int, indexed: bool = True) -> int | None:
        m = _OPERAND_RE.match(operand.strip())
        if m is None:
            raise QasmError(f"bad operand {operand.strip()!r}", line, col)
        name, idx = m.group(1), m.group(2)
        if qreg is None or name != qreg[0]:
            raise QasmError(f"reference to undeclared register {name!r}", line, col)
        if idx is None:
            if indexed:
                raise QasmError(f"operand {name!r} must be indexed", line, col)
            return None
        q = int(idx)
        if q >= qreg[1]:
            raise QasmError(f"qubit index {q} out of range for {name}[{qreg[1]}]", line, col)
        return q

    for stmt, line, col in _statements(text):
        if not stmt:
            continue
        head = stmt.split(None, 1)[0]
        if head == "OPENQASM" or head == "include":
            continue
        if head == "qreg":
            m = _QREG_RE.match(stmt)
            if m is None:
                raise QasmError("malformed qreg declaration", line, col)
            if qreg is not None:
                raise QasmError("more than one qreg declared", line, col)
            qreg = (m.group(1), int(m.group(2)))
            continue
        if head == "creg":
            if _CREG_RE.match(stmt) is None:
                raise QasmError("malformed creg declaration", line, col)
            continue
        if head in ("measure", "barrier"):
            continue
        if head in ("cx", "cz"):
            operands = stmt[len(head):].split(",")
            if len(operands) != 2:
                raise QasmError(f"{head} takes exactly two operands", line, col)
            q1 = resolve(operands[0], line, col)
            q2 = resolve(operands[1], line, col)
            if q1 == q2:
                raise QasmError(f"{head} acts twice on qubit {q1}", line, col)
            gates.append(normalize_pair(q1, q2))
            continue
        m = _CALL_RE.match(stmt)
        if m is None or not m.group(3).strip():
            raise QasmError(f"unrecognized statement {stmt!r}", line, col)
        operands = m.group(3).split(",")
        if len(operands) != 1:
            raise QasmError(f"gate {m.group(1)!r} is not a recognized two-qubit gate", line, col)
        resolve(operands[0], line, col, indexed=False)  # one-qubit gate: validate, drop

    if qreg is None:
        raise QasmError("no qreg declared", 1, 1)
    return gates, qreg[1]


# ---------------------------------------------------------------------------
# Scheduling and generation

def chunk_asap(gates: list[GatePair], n_qubits: int) -> ChunkedCircuit:
    """Greedy ASAP layering: each gate lands in the earliest chunk after the
    last chunk of any prior gate sharing a qubit."""
    frontier = [0] * n_qubits
    chunks: list[list[GatePair]] = []
    for q1, q2 in gates:
        pair = normalize_pair(q1, q2)
        if pair[1] >= n_qubits:
            raise ValueError(f"gate {pair} exceeds {n_qubits} qubits")
        c = max(frontier[pair[0]], frontier[pair[1]])
        if c == len(chunks):
            chunks.append([])
        chunks[c].append(pair)
        frontier[pair[0]] = c + 1
        frontier[pair[1]] = c + 1
    return ChunkedCircuit(n_qubits, tuple(tuple(sorted(c)) for c in chunks))


@dataclass(frozen=True)
class RandomPauliSpec:
    """Generator spec: two-local random Pauli terms, Trotterized."""

    n_qubits: int
    n_terms: int
    trotter_steps: int
    seed: int = 0

    def __post_init__(self):
        if self.n_terms < 1:
            raise ValueError("n_terms must be >= 1")
        if self.trotter_steps < 1:
            raise ValueError("trotter_steps must be >= 1")


def gen_random_pauli_trotter(spec: RandomPauliSpec) -> list[GatePair]:
    """Draw n_terms distinct qubit pairs uniformly, then emit the term list
    once per Trotter step (terms in draw order). Deterministic under seed."""
    all_pairs = list(itertools.combinations(range(spec.n_qubits), 2))
    if spec.n_terms > len(all_pairs):
        raise ValueError(
            f"{spec.n_terms} terms exceed the {len(all_pairs)} distinct pairs "
            f"on {spec.n_qubits} qubits"
        )
    rng = random.Random(spec.seed)
    terms = rng.sample(all_pairs, spec.n_terms)
    return terms * spec.trotter_steps


def playable_atoms(circuit: ChunkedCircuit, t: int, window: int) -> list[int]:
    """Qubits appearing in chunks t..t+window-1 (clipped at the end), ascending."""
    if not 0 <= t < circuit.n_chunks:
        raise ValueError(f"chunk index {t} out of range [0, {circuit.n_chunks})")
    if window < 1:
        raise ValueError("window must be >= 1")
    atoms: set[int] = set()
    for chunk in circuit.chunks[t:min(t + window, circuit.n_chunks)]:
        for q1, q2 in chunk:
            atoms.update((q1, q2))
    return sorted(atoms)


# ---------------------------------------------------------------------------
# Native JSON format

def gates_to_json(gates: list[GatePair], n_qubits: int) -> dict:
    return {"n_qubits": n_qubits, "gates": [list(g) for g in gates]}


def circuit_from_json(obj: dict) -> ChunkedCircuit:
    """Load either native form: a chunked circuit as-is, or a flat gate list
    (chunked with ASAP)."""
    n_qubits = int(obj["n_qubits"])
    if "chunks" in obj:
        chunks = tuple(
            tuple(sorted(normalize_pair(int(a), int(b)) for a, b in chunk))
            for chunk in obj["chunks"]
        )
        return ChunkedCircuit(n_qubits, chunks)
    if "gates" in obj:
        gates = [normalize_pair(int(a), int(b)) for a, b in obj["gates"]]
        return chunk_asap(gates, n_qubits)
    raise ValueError("circuit JSON needs a 'chunks' or 'gates' field")


def load_circuit(path: str) -> ChunkedCircuit:
    """Read a circuit file: .qasm sources are parsed and ASAP-chunked,
    anything else is treated as native JSON."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".qasm"):
        gates, n_qubits = parse_qasm(text)
        return chunk_asap(gates, n_qubits)
    return circuit_from_json(json.loads(text))
