"""Ready-made circuit families used by the experiments and demos."""
from __future__ import annotations

import math

import numpy as np

from .qcore import CircuitFamily, GateOp


def conditional_phase_family(num_qubits: int = 3, key_bits: int = 4) -> CircuitFamily:
    """``H`` on every qubit, then key bit ``j`` switches on a Z-rotation of qubit ``j mod n``.

    The first bit landing on a qubit rotates it by ``pi/2`` and the second by
    ``pi``, so for ``key_bits <= 2 * num_qubits`` every key gets a distinct
    phase pattern and distinct keys sit at fidelity at most 1/2.
    """
    gates = [GateOp("H", q) for q in range(num_qubits)]
    for j in range(key_bits):
        q, m = j % num_qubits, j // num_qubits
        gates.append(GateOp("RZ", q, angle=math.pi / 2 * 2**m, cond_key_bit=j))
    return CircuitFamily(num_qubits, key_bits, tuple(gates))


def basis_family(key_bits: int = 4) -> CircuitFamily:
    """``|x>`` itself: pairwise orthogonal outputs, one qubit per key bit."""
    gates = tuple(GateOp("X", j, cond_key_bit=j) for j in range(key_bits))
    return CircuitFamily(key_bits, key_bits, gates)


def constant_family(num_qubits: int = 2, key_bits: int = 2) -> CircuitFamily:
    """Every key yields the same Bell-like state."""
    gates = (GateOp("H", 0),) + tuple(
        GateOp("CNOT", q, control=0) for q in range(1, num_qubits)
    )
    return CircuitFamily(num_qubits, key_bits, gates)


def entangled_rotation_family(num_qubits: int, key_bits: int, seed: int = 0) -> CircuitFamily:
    """Random unconditional layer plus key-conditioned Y/Z rotations and a CZ ladder."""
    rng = np.random.default_rng(seed)
    gates = [GateOp("RY", q, angle=float(rng.uniform(0, math.pi))) for q in range(num_qubits)]
    for j in range(key_bits):
        q = j % num_qubits
        kind = "RY" if j % 2 else "RZ"
        gates.append(GateOp(kind, q, angle=float(rng.uniform(0.5, 2.5)), cond_key_bit=j))
        if num_qubits > 1:
            gates.append(GateOp("CZ", (q + 1) % num_qubits, control=q))
    return CircuitFamily(num_qubits, key_bits, tuple(gates))


FAMILIES = {
    "conditional_phase": conditional_phase_family,
    "basis": basis_family,
    "constant": constant_family,
    "entangled_rotation": entangled_rotation_family,
}


def family_from_config(spec: dict) -> CircuitFamily:
    """Either a named builder ``{"name": ..., **kwargs}`` or a serialized family."""
    if "name" in spec:
        kwargs = {k: v for k, v in spec.items() if k != "name"}
        return FAMILIES[spec["name"]](**kwargs)
    return CircuitFamily.from_dict(spec)
