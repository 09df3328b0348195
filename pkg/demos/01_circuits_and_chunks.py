"""Walkthrough: getting circuits into the game.

A circuit enters either as a QASM 2.0 subset file or as a generated random
two-local Trotter circuit, is stripped down to its two-qubit gates, and is
layered into parallel chunks. Each chunk is what the array executes in a
single gate step.
"""

from atomgame import (
    RandomPauliSpec,
    chunk_asap,
    gen_random_pauli_trotter,
    parse_qasm,
    playable_atoms,
)

SOURCE = """
OPENQASM 2.0;
include "qelib1.inc";
qreg q[5];
h q[0];
cx q[0],q[1];
cx q[2],q[3];
cx q[1],q[2];
rz(0.25) q[3];
cx q[3],q[4];
measure q[0] -> c[0];
"""

gates, n_qubits = parse_qasm(SOURCE)
print("two-qubit gates in program order:", gates)

circuit = chunk_asap(gates, n_qubits)
print(f"\nASAP layering into {circuit.n_chunks} chunks:")
for t, chunk in enumerate(circuit.chunks):
    print(f"  chunk {t}: {sorted(chunk)}")

# The playable atoms at step t are everyone gated within the next W chunks;
# they are the only atoms a planner may relocate at that step.
for t in range(circuit.n_chunks):
    print(f"playable at t={t} (window 2): {playable_atoms(circuit, t, 2)}")

# Generated circuits: distinct random qubit pairs, repeated per Trotter step.
spec = RandomPauliSpec(n_qubits=8, n_terms=5, trotter_steps=2, seed=42)
generated = gen_random_pauli_trotter(spec)
print("\ngenerated gate list (terms repeat across steps):")
print(" ", generated[:5])
print(" ", generated[5:])
print("chunked:", [sorted(c) for c in chunk_asap(generated, 8).chunks])
