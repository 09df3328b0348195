import random

import pytest

from atomgame.circuit import (
    ChunkedCircuit,
    QasmError,
    RandomPauliSpec,
    chunk_asap,
    circuit_from_json,
    gen_random_pauli_trotter,
    parse_qasm,
    playable_atoms,
)


def asap_oracle(gates):
    """Dependency-DAG longest-path scheduler: a gate's layer is one past the
    deepest earlier gate sharing a qubit."""
    layers = []
    for i, (a, b) in enumerate(gates):
        prior = [layers[j] for j in range(i) if {a, b} & set(gates[j])]
        layers.append(1 + max(prior) if prior else 0)
    chunks = [set() for _ in range(max(layers) + 1)] if layers else []
    for layer, gate in zip(layers, gates):
        chunks[layer].add(tuple(sorted(gate)))
    return chunks


# ---------------------------------------------------------------------------
# QASM parsing

def test_parse_single_qubit_only():
    gates, n = parse_qasm("qreg q[4]; h q[0]; x q[1]; rz(0.3) q[2];")
    assert gates == []
    assert n == 4


def test_parse_mixed_program():
    gates, n = parse_qasm("qreg q[3]; cx q[0],q[1]; h q[2]; cx q[1],q[2];")
    assert gates == [(0, 1), (1, 2)]
    assert n == 3


def test_parse_full_header_and_ignored_statements():
    src = """OPENQASM 2.0;
include "qelib1.inc";
qreg q[5];
creg c[5];
u3(0.1,0.2,0.3) q[0];  // a comment
cz q[4],q[1];
barrier q;
measure q[0] -> c[0];
"""
    gates, n = parse_qasm(src)
    assert gates == [(1, 4)]  # pairs normalized low-high
    assert n == 5


def test_parse_arity_violation():
    with pytest.raises(QasmError):
        parse_qasm("qreg q[2]; cx q[0];")


def test_parse_error_positions():
    with pytest.raises(QasmError) as err:
        parse_qasm("qreg q[2];\n  bogus! q[0];")
    assert err.value.line == 2
    assert err.value.col == 3


def test_parse_undeclared_register():
    with pytest.raises(QasmError, match="undeclared"):
        parse_qasm("qreg q[2]; cx r[0],r[1];")
    with pytest.raises(QasmError, match="undeclared"):
        parse_qasm("h q[0]; qreg q[2];")


def test_parse_index_out_of_range():
    with pytest.raises(QasmError, match="out of range"):
        parse_qasm("qreg q[2]; cx q[0],q[5];")


def test_parse_rejects_duplicate_qreg_and_missing_semicolon():
    with pytest.raises(QasmError, match="more than one"):
        parse_qasm("qreg q[2]; qreg r[2];")
    with pytest.raises(QasmError, match="';'"):
        parse_qasm("qreg q[2]; h q[0]")
    with pytest.raises(QasmError, match="no qreg"):
        parse_qasm("// nothing here")


def test_parse_same_qubit_twice_is_an_error():
    with pytest.raises(QasmError):
        parse_qasm("qreg q[2]; cx q[1],q[1];")


# ---------------------------------------------------------------------------
# ASAP chunking

def test_chunk_asap_example():
    circuit = chunk_asap([(0, 1), (2, 3), (0, 2)], 4)
    assert [set(c) for c in circuit.chunks] == asap_oracle([(0, 1), (2, 3), (0, 2)])
    assert [set(c) for c in circuit.chunks] == [{(0, 1), (2, 3)}, {(0, 2)}]


def test_chunk_empty_and_repeated():
    assert chunk_asap([], 3).chunks == ()
    circuit = chunk_asap([(0, 1), (0, 1)], 2)
    assert [set(c) for c in circuit.chunks] == [{(0, 1)}, {(0, 1)}]


def test_chunk_matches_oracle_on_random_inputs():
    rng = random.Random(11)
    for _ in range(100):
        n = rng.randint(2, 10)
        gates = [tuple(rng.sample(range(n), 2)) for _ in range(rng.randint(0, 25))]
        circuit = chunk_asap(gates, n)
        assert [set(c) for c in circuit.chunks] == asap_oracle(gates)
        for chunk in circuit.chunks:
            used = [q for g in chunk for q in g]
            assert len(used) == len(set(used))


def test_chunk_order_preserved_for_shared_qubits():
    rng = random.Random(13)
    for _ in range(50):
        n = rng.randint(2, 8)
        gates = [tuple(rng.sample(range(n), 2)) for _ in range(rng.randint(2, 20))]
        circuit = chunk_asap(gates, n)
        layer_of = {}
        remaining = {t: list(c) for t, c in enumerate(circuit.chunks)}
        for i, g in enumerate(gates):
            pair = tuple(sorted(g))
            t = min(t for t, c in remaining.items() if pair in c)
            remaining[t].remove(pair)
            layer_of[i] = t
        for i in range(len(gates)):
            for j in range(i + 1, len(gates)):
                if set(gates[i]) & set(gates[j]):
                    assert layer_of[i] < layer_of[j]


def test_parse_chunk_deterministic_bytes():
    src = "qreg q[6]; cx q[0],q[1]; cx q[2],q[3]; cx q[1],q[2]; cx q[4],q[5];"
    out = [chunk_asap(*parse_qasm(src)).dumps() for _ in range(3)]
    assert out[0] == out[1] == out[2]


# ---------------------------------------------------------------------------
# Random two-local Trotter generator

def test_generator_deterministic_and_step_periodic():
    spec = RandomPauliSpec(n_qubits=4, n_terms=2, trotter_steps=2, seed=9)
    gates = gen_random_pauli_trotter(spec)
    assert gates == gen_random_pauli_trotter(spec)
    assert len(gates) == 4
    assert gates[:2] == gates[2:]


def test_generator_single_term():
    gates = gen_random_pauli_trotter(RandomPauliSpec(n_qubits=3, n_terms=1, trotter_steps=1, seed=0))
    assert len(gates) == 1


def test_generator_pigeonhole():
    with pytest.raises(ValueError):
        gen_random_pauli_trotter(RandomPauliSpec(n_qubits=2, n_terms=2, trotter_steps=1, seed=0))


def test_generator_terms_distinct():
    spec = RandomPauliSpec(n_qubits=10, n_terms=20, trotter_steps=1, seed=5)
    gates = gen_random_pauli_trotter(spec)
    assert len(set(gates)) == 20


def test_spec_validation():
    with pytest.raises(ValueError):
        RandomPauliSpec(n_qubits=4, n_terms=0, trotter_steps=1)
    with pytest.raises(ValueError):
        RandomPauliSpec(n_qubits=4, n_terms=1, trotter_steps=0)


# ---------------------------------------------------------------------------
# Playable atoms

def test_playable_atoms_union():
    circuit = ChunkedCircuit(4, (((0, 1),), ((2, 3),)))
    assert playable_atoms(circuit, 0, 2) == [0, 1, 2, 3]
    assert playable_atoms(circuit, 0, 1) == [0, 1]
    assert playable_atoms(circuit, 1, 2) == [2, 3]  # window clipped at the end


def test_playable_atoms_validation():
    circuit = ChunkedCircuit(4, (((0, 1),),))
    with pytest.raises(ValueError):
        playable_atoms(circuit, 1, 2)
    with pytest.raises(ValueError):
        playable_atoms(circuit, 0, 0)


# ---------------------------------------------------------------------------
# Native format and invariants

def test_circuit_from_json_both_forms():
    chunked = circuit_from_json({"n_qubits": 4, "chunks": [[[0, 1], [2, 3]], [[0, 2]]]})
    flat = circuit_from_json({"n_qubits": 4, "gates": [[0, 1], [2, 3], [0, 2]]})
    assert chunked == flat
    with pytest.raises(ValueError):
        circuit_from_json({"n_qubits": 4})


def test_chunked_circuit_invariants():
    with pytest.raises(ValueError):
        ChunkedCircuit(3, (((0, 1), (1, 2)),))  # qubit reused within a chunk
    with pytest.raises(ValueError):
        ChunkedCircuit(2, (((0, 1),), ()))  # empty chunk alongside gates
    with pytest.raises(ValueError):
        ChunkedCircuit(2, (((0, 2),),))  # qubit out of range
    assert ChunkedCircuit(3, ((), ())).n_chunks == 2  # gate-free circuit may keep empty chunks
