"""Dense state-vector simulation and distance metrics.

Qubit 0 is the most significant bit of a basis index, so ``|q0 q1 ... q_{n-1}>``
maps to ``int("q0q1...", 2)``. Key bit 0 is likewise the leading character of a
key bitstring, which makes lexicographic key order equal integer order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DimensionError, InvalidKey, InvalidParameter, InvalidState

NORM_TOL = 1e-10

_SQRT2_INV = 1 / np.sqrt(2)
_FIXED_GATES = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
}
_ROTATIONS = ("RZ", "RY")
_TWO_QUBIT = ("CNOT", "CZ")
GATE_KINDS = tuple(_FIXED_GATES) + _ROTATIONS + _TWO_QUBIT


def _rotation(kind: str, theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PureState:
    """Unit-norm amplitude vector over ``num_qubits`` qubits."""

    amplitudes: np.ndarray
    num_qubits: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        if self.num_qubits < 1 or amps.size != 2**self.num_qubits:
            raise InvalidState(
                f"{amps.size} amplitudes do not describe {self.num_qubits} qubits"
            )
        norm = np.vdot(amps, amps).real
        if abs(norm - 1) > NORM_TOL:
            raise InvalidState(f"state norm^2 is {norm!r}, expected 1")
        object.__setattr__(self, "amplitudes", _readonly(amps))

    @classmethod
    def from_vector(cls, vec) -> PureState:
        """Build a state from an arbitrary nonzero vector, normalizing it."""
        vec = np.asarray(vec, dtype=complex).ravel()
        n = int(round(np.log2(vec.size)))
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise InvalidState("zero vector")
        return cls(vec / norm, n)

    @classmethod
    def basis(cls, index: int, num_qubits: int) -> PureState:
        vec = np.zeros(2**num_qubits, dtype=complex)
        vec[index] = 1
        return cls(vec, num_qubits)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density_matrix(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.num_qubits)


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray
    num_qubits: int

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        d = 2**self.num_qubits
        if rho.shape != (d, d):
            raise InvalidState(f"shape {rho.shape} does not describe {self.num_qubits} qubits")
        if np.max(np.abs(rho - rho.conj().T)) > NORM_TOL:
            raise InvalidState("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1) > NORM_TOL:
            raise InvalidState("density matrix trace differs from 1")
        if np.linalg.eigvalsh(rho).min() < -1e-9:
            raise InvalidState("density matrix has a negative eigenvalue")
        object.__setattr__(self, "entries", _readonly(rho))


@dataclass(frozen=True)
class GateOp:
    """One gate, optionally applied only when key bit ``cond_key_bit`` is 1."""

    kind: str
    target: int
    control: int | None = None
    angle: float | None = None
    cond_key_bit: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise InvalidParameter(f"unknown gate kind {self.kind!r}")
        if self.kind in _TWO_QUBIT:
            if self.control is None:
                raise InvalidParameter(f"{self.kind} needs a control qubit")
            if self.control == self.target:
                raise InvalidParameter("control and target coincide")
        elif self.control is not None:
            raise InvalidParameter(f"{self.kind} takes no control qubit")
        if (self.kind in _ROTATIONS) != (self.angle is not None):
            raise InvalidParameter(f"angle given/missing for {self.kind}")
        if self.angle is not None:
            object.__setattr__(self, "angle", float(self.angle))

    def qubits(self) -> tuple[int, ...]:
        return (self.target,) if self.control is None else (self.control, self.target)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "target": self.target}
        if self.control is not None:
            d["control"] = self.control
        if self.angle is not None:
            d["angle"] = self.angle
        if self.cond_key_bit is not None:
            d["cond_key_bit"] = self.cond_key_bit
        return d


def apply_gate(amps: np.ndarray, gate: GateOp, num_qubits: int) -> np.ndarray:
    """Apply ``gate`` to one state vector (or a stack of them along axis 0).

    The last axis must have length ``2**num_qubits``; returns a new array.
    """
    lead = amps.shape[:-1]
    psi = amps.reshape(lead + (2,) * num_qubits)
    off = len(lead)
    if gate.kind in _TWO_QUBIT:
        psi = psi.copy()
        idx = [slice(None)] * psi.ndim
        idx[off + gate.control] = 1
        if gate.kind == "CZ":
            idx[off + gate.target] = 1
            psi[tuple(idx)] *= -1
        else:
            sub = psi[tuple(idx)]
            # target axis shifts down by one when control precedes it
            t_axis = off + gate.target - (1 if gate.control < gate.target else 0)
            psi[tuple(idx)] = np.flip(sub, axis=t_axis)
        return psi.reshape(amps.shape)
    if gate.kind in _ROTATIONS:
        mat = _rotation(gate.kind, gate.angle)
    else:
        mat = _FIXED_GATES[gate.kind]
    axis = off + gate.target
    psi = np.tensordot(mat, psi, axes=([1], [axis]))
    psi = np.moveaxis(psi, 0, axis)
    return np.ascontiguousarray(psi).reshape(amps.shape)


def parse_key(key, key_bits: int) -> tuple[int, ...]:
    """Normalize a key given as ``"0101"`` or a sequence of 0/1 integers."""
    if isinstance(key, str):
        if any(c not in "01" for c in key):
            raise InvalidKey(f"key {key!r} is not a bitstring")
        bits = tuple(int(c) for c in key)
    else:
        try:
            bits = tuple(int(b) for b in key)
        except TypeError:
            raise InvalidKey(f"key {key!r} is not a bit sequence") from None
        if any(b not in (0, 1) for b in bits):
            raise InvalidKey(f"key {key!r} has non-binary entries")
    if len(bits) != key_bits:
        raise InvalidKey(f"key has {len(bits)} bits, family expects {key_bits}")
    return bits


def key_to_index(key, key_bits: int) -> int:
    idx = 0
    for b in parse_key(key, key_bits):
        idx = (idx << 1) | b
    return idx


def index_to_key(index: int, key_bits: int) -> str:
    if not 0 <= index < 2**key_bits:
        raise InvalidKey(f"key index {index} out of range for {key_bits} bits")
    return format(index, f"0{key_bits}b") if key_bits else ""


@dataclass(frozen=True)
class CircuitFamily:
    """Keyed generator ``x -> |psi_x>`` built from key-conditioned gates."""

    num_qubits: int
    key_bits: int
    gates: tuple[GateOp, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.num_qubits < 1:
            raise InvalidParameter("num_qubits must be positive")
        if self.key_bits < 0:
            raise InvalidParameter("key_bits must be nonnegative")
        for g in self.gates:
            if any(not 0 <= q < self.num_qubits for q in g.qubits()):
                raise InvalidParameter(f"gate {g} addresses a qubit outside 0..{self.num_qubits - 1}")
            if g.cond_key_bit is not None and not 0 <= g.cond_key_bit < self.key_bits:
                raise InvalidParameter(f"gate {g} references key bit outside 0..{self.key_bits - 1}")

    @property
    def num_keys(self) -> int:
        return 2**self.key_bits

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    def keys(self) -> list[str]:
        return [index_to_key(i, self.key_bits) for i in range(self.num_keys)]

    def to_dict(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "key_bits": self.key_bits,
            "gates": [g.to_dict() for g in self.gates],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> CircuitFamily:
        gates = tuple(
            GateOp(
                kind=g["kind"],
                target=int(g["target"]),
                control=None if g.get("control") is None else int(g["control"]),
                angle=g.get("angle"),
                cond_key_bit=None if g.get("cond_key_bit") is None else int(g["cond_key_bit"]),
            )
            for g in d.get("gates", [])
        )
        return cls(int(d["num_qubits"]), int(d["key_bits"]), gates)

    @classmethod
    def from_json(cls, text: str) -> CircuitFamily:
        return cls.from_dict(json.loads(text))


def generate_state(family: CircuitFamily, key) -> PureState:
    """Run the key-conditioned gate program on ``|0...0>``."""
    bits = parse_key(key, family.key_bits)
    amps = np.zeros(family.dim, dtype=complex)
    amps[0] = 1
    for g in family.gates:
        if g.cond_key_bit is None or bits[g.cond_key_bit]:
            amps = apply_gate(amps, g, family.num_qubits)
    return PureState(amps, family.num_qubits)


@lru_cache(maxsize=64)
def _all_states(family: CircuitFamily) -> np.ndarray:
    out = np.empty((family.num_keys, family.dim), dtype=complex)
    for i, key in enumerate(family.keys()):
        out[i] = generate_state(family, key).amplitudes
    out.flags.writeable = False
    return out


def family_states(family: CircuitFamily) -> np.ndarray:
    """All ``2**key_bits`` output states stacked row-wise, in key-index order."""
    return _all_states(family)


def _check_same_dim(a, b):
    if a.num_qubits != b.num_qubits:
        raise DimensionError(f"{a.num_qubits} vs {b.num_qubits} qubits")


def fidelity(a: PureState, b: PureState) -> float:
    _check_same_dim(a, b)
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def trace_distance_pure(a: PureState, b: PureState) -> float:
    return float(np.sqrt(max(0.0, 1.0 - fidelity(a, b))))


def frobenius_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    _check_same_dim(a, b)
    return float(np.linalg.norm(a.entries - b.entries, "fro"))


def trace_norm(mat: np.ndarray) -> float:
    """Schatten-1 norm of a Hermitian matrix."""
    if np.max(np.abs(mat - mat.conj().T), initial=0.0) > NORM_TOL:
        raise InvalidState("trace norm requested for a non-Hermitian matrix")
    return float(np.abs(np.linalg.eigvalsh(mat)).sum())


def trace_distance_mixed(a: DensityMatrix, b: DensityMatrix) -> float:
    _check_same_dim(a, b)
    # averaging both orders makes the result exactly symmetric in floating point
    return 0.25 * (trace_norm(a.entries - b.entries) + trace_norm(b.entries - a.entries))


def random_pure_state(num_qubits: int, rng: np.random.Generator) -> PureState:
    """Haar-random pure state (normalized complex Gaussian vector)."""
    d = 2**num_qubits
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return PureState(v / np.linalg.norm(v), num_qubits)


def fidelity_matrix(states_a: np.ndarray, states_b: np.ndarray) -> np.ndarray:
    """Pairwise ``|<a_i|b_j>|^2`` for stacked amplitude rows."""
    return np.abs(states_a.conj() @ states_b.T) ** 2
