"""Random-unitary POVMs and their exact outcome statistics.

A design of ``K`` unitaries on ``n`` qubits defines the POVM with elements
``E_{k,y} = U_k^dag |y><y| U_k / K``. Outcomes ``(k, y)`` are encoded as the
integer ``k << n | y`` written with ``ceil(log2 K) + n`` bits. Encoded strings
past ``K * 2**n`` are never produced by the measurement itself; they exist only
as targets of the uniform-noise branch of a mixing channel.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, InvalidParameter
from .qcore import GateOp, PureState, apply_gate

CONSTRUCTIONS = ("haar_random", "random_clifford_circuit")
UNITARY_TOL = 1e-9


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed ``d x d`` unitary from the QR decomposition of a Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def random_clifford_circuit_unitary(num_qubits: int, rng: np.random.Generator,
                                    num_gates: int | None = None) -> np.ndarray:
    """Unitary of a random circuit over {H, S, CNOT}."""
    if num_gates is None:
        num_gates = 10 * num_qubits * (num_qubits + 1)
    d = 2**num_qubits
    cols = np.eye(d, dtype=complex)  # row j holds U|j>
    choices = ("H", "S", "CNOT") if num_qubits > 1 else ("H", "S")
    for _ in range(num_gates):
        kind = choices[rng.integers(len(choices))]
        if kind == "CNOT":
            c, t = rng.choice(num_qubits, size=2, replace=False)
            gate = GateOp("CNOT", int(t), control=int(c))
        else:
            gate = GateOp(kind, int(rng.integers(num_qubits)))
        cols = apply_gate(cols, gate, num_qubits)
    return np.ascontiguousarray(cols.T)


@lru_cache(maxsize=32)
def _design_unitaries(num_qubits: int, K: int, construction: str, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    d = 2**num_qubits
    out = np.empty((K, d, d), dtype=complex)
    for k in range(K):
        if construction == "haar_random":
            out[k] = haar_unitary(d, rng)
        else:
            out[k] = random_clifford_circuit_unitary(num_qubits, rng)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class MeasurementDesign:
    num_qubits: int
    K: int
    construction: str
    seed: int
    unitaries: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.num_qubits < 1 or self.K < 1:
            raise InvalidParameter("num_qubits and K must be positive")
        if self.construction not in CONSTRUCTIONS:
            raise InvalidParameter(f"construction must be one of {CONSTRUCTIONS}")
        us = _design_unitaries(self.num_qubits, self.K, self.construction, int(self.seed))
        object.__setattr__(self, "unitaries", us)

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    @property
    def index_bits(self) -> int:
        return math.ceil(math.log2(self.K)) if self.K > 1 else 0

    @property
    def outcome_bits(self) -> int:
        return self.index_bits + self.num_qubits

    @property
    def alphabet_size(self) -> int:
        """Size of the encoded alphabet ``{0,1}^outcome_bits``."""
        return 2**self.outcome_bits

    def to_dict(self) -> dict:
        return {"num_qubits": self.num_qubits, "K": self.K,
                "construction": self.construction, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> MeasurementDesign:
        return cls(int(d["num_qubits"]), int(d["K"]), str(d["construction"]), int(d["seed"]))

    @classmethod
    def from_json(cls, text: str) -> MeasurementDesign:
        return cls.from_dict(json.loads(text))


class FixedDesign(MeasurementDesign):
    """A design with caller-supplied unitaries (for hand-built test cases)."""

    def __init__(self, unitaries):
        us = np.array(unitaries, dtype=complex)
        if us.ndim == 2:
            us = us[None]
        K, d, _ = us.shape
        n = int(round(math.log2(d)))
        object.__setattr__(self, "num_qubits", n)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "construction", "fixed")
        object.__setattr__(self, "seed", -1)
        us.flags.writeable = False
        object.__setattr__(self, "unitaries", us)

    def __eq__(self, other):
        return self is other

    def __hash__(self):
        return id(self)

    def to_dict(self) -> dict:
        # fixed unitaries cannot be regenerated from a seed, so they travel with the design
        return {"num_qubits": self.num_qubits, "K": self.K, "construction": "fixed",
                "unitaries_re": self.unitaries.real.tolist(),
                "unitaries_im": self.unitaries.imag.tolist()}


def build_design(num_qubits: int, K: int, construction: str = "haar_random",
                 seed: int = 0) -> MeasurementDesign:
    """Seeded ensemble of ``K`` unitaries on ``num_qubits`` qubits.

    Examples
    --------
    >>> d = build_design(2, 16, "random_clifford_circuit", seed=1)
    >>> d.unitaries.shape
    (16, 4, 4)
    """
    return MeasurementDesign(num_qubits, K, construction, seed)


def default_K(num_qubits: int) -> int:
    return 4 * 2**num_qubits


def is_valid_design(design: MeasurementDesign, tol: float = UNITARY_TOL) -> bool:
    us = design.unitaries
    eye = np.eye(design.dim)
    if any(np.max(np.abs(u.conj().T @ u - eye)) > tol for u in us):
        return False
    return np.max(np.abs(povm_sum(design) - eye)) <= tol


def povm_sum(design: MeasurementDesign) -> np.ndarray:
    """``sum_{k,y} U_k^dag |y><y| U_k / K``; the identity for any valid design."""
    total = np.zeros((design.dim, design.dim), dtype=complex)
    for u in design.unitaries:
        for y in range(design.dim):
            row = u[y].conj()  # <y|U as a ket is U^dag|y>
            total += np.outer(row, row.conj())
    return total / design.K


class Outcome(NamedTuple):
    k_index: int
    basis_outcome: str
    encoded: str


def encode_outcome(design: MeasurementDesign, k_index: int, basis_outcome) -> Outcome:
    n = design.num_qubits
    if isinstance(basis_outcome, str):
        if len(basis_outcome) != n or any(c not in "01" for c in basis_outcome):
            raise InvalidParameter(f"basis outcome {basis_outcome!r} is not an {n}-bit string")
        y = int(basis_outcome, 2)
    else:
        y = int(basis_outcome)
    if not 0 <= k_index < design.K or not 0 <= y < design.dim:
        raise InvalidParameter(f"outcome ({k_index}, {basis_outcome}) outside the alphabet")
    code = (k_index << n) | y
    return Outcome(k_index, format(y, f"0{n}b"), format(code, f"0{design.outcome_bits}b"))


def decode_outcome(design: MeasurementDesign, encoded) -> Outcome:
    """Inverse of :func:`encode_outcome`; accepts the bitstring or its integer value."""
    code = int(encoded, 2) if isinstance(encoded, str) else int(encoded)
    n = design.num_qubits
    if not 0 <= code < design.K * design.dim:
        raise InvalidParameter(f"encoded outcome {encoded!r} is not a measurement outcome")
    return encode_outcome(design, code >> n, code & (design.dim - 1))


def _check_dims(design, state_dim):
    if state_dim != design.dim:
        raise DimensionError(f"state dimension {state_dim} vs design dimension {design.dim}")


def outcome_probabilities(design: MeasurementDesign, states: np.ndarray) -> np.ndarray:
    """Outcome distributions for stacked amplitude rows, padded to ``alphabet_size``."""
    states = np.atleast_2d(states)
    _check_dims(design, states.shape[-1])
    amps = np.einsum("kyd,xd->xky", design.unitaries, states)
    probs = (np.abs(amps) ** 2 / design.K).reshape(states.shape[0], -1)
    out = np.zeros((states.shape[0], design.alphabet_size))
    out[:, : probs.shape[1]] = probs
    return out


def outcome_distribution(design: MeasurementDesign, state: PureState) -> np.ndarray:
    """Exact ``Pr[(k, y)] = |<y|U_k|psi>|^2 / K`` indexed by encoded outcome."""
    return outcome_probabilities(design, state.amplitudes)[0]


def sample_outcome_index(design: MeasurementDesign, state: PureState,
                         rng: np.random.Generator) -> int:
    _check_dims(design, state.dim)
    k = int(rng.integers(design.K))
    p = np.abs(design.unitaries[k] @ state.amplitudes) ** 2
    y = int(rng.choice(design.dim, p=p / p.sum()))
    return (k << design.num_qubits) | y


def sample_outcome(design: MeasurementDesign, state: PureState,
                   rng: np.random.Generator) -> Outcome:
    """Pick ``k`` uniformly, then measure ``U_k|psi>`` in the computational basis."""
    return decode_outcome(design, sample_outcome_index(design, state, rng))


def measured_l1(design: MeasurementDesign, states_a: np.ndarray, states_b: np.ndarray) -> np.ndarray:
    """Row-wise ``sum_z |p_a(z) - p_b(z)|`` between measured distributions."""
    pa = outcome_probabilities(design, states_a)
    pb = outcome_probabilities(design, states_b)
    return np.abs(pa - pb).sum(axis=1)


def pure_frobenius(states_a: np.ndarray, states_b: np.ndarray) -> np.ndarray:
    """Row-wise ``||a><a| - |b><b|||_F = sqrt(2 (1 - |<a|b>|^2))``."""
    f = np.abs(np.einsum("xd,xd->x", states_a.conj(), states_b)) ** 2
    return np.sqrt(np.clip(2 * (1 - f), 0, None))


def random_state_pairs(num_qubits: int, count: int, rng: np.random.Generator,
                       min_frobenius: float = 0.0):
    """``count`` Haar-random pure pairs whose Frobenius distance is at least ``min_frobenius``."""
    d = 2**num_qubits
    a_rows, b_rows = [], []
    while len(a_rows) < count:
        v = rng.standard_normal((2, d)) + 1j * rng.standard_normal((2, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        if pure_frobenius(v[:1], v[1:])[0] >= min_frobenius:
            a_rows.append(v[0])
            b_rows.append(v[1])
    return np.array(a_rows), np.array(b_rows)


DEGENERATE_FROBENIUS = 1e-6


def distortion_ratios(design: MeasurementDesign, states_a: np.ndarray,
                      states_b: np.ndarray) -> np.ndarray:
    """``||M(a) - M(b)||_1 / ||a - b||_F`` per pair; near-identical pairs are dropped."""
    fro = pure_frobenius(states_a, states_b)
    keep = fro >= DEGENERATE_FROBENIUS
    return measured_l1(design, states_a[keep], states_b[keep]) / fro[keep]


class Calibration(NamedTuple):
    B_hat: float
    worst_ratio: float


def sample_distortion_ratios(design: MeasurementDesign, trial_pairs: int,
                             rng: np.random.Generator) -> np.ndarray:
    if trial_pairs < 1:
        raise InvalidParameter("trial_pairs must be at least 1")
    a, b = random_state_pairs(design.num_qubits, trial_pairs, rng)
    return distortion_ratios(design, a, b)


def calibrate_distortion(design: MeasurementDesign, trial_pairs: int,
                         rng: np.random.Generator) -> Calibration:
    """Empirical lower constant for ``B ||rho0 - rho1||_F <= ||M(rho0) - M(rho1)||_1``.

    Returns the worst observed ratio over ``trial_pairs`` Haar-random pure pairs
    and a conservative ``B_hat = 0.9 * worst_ratio``.
    """
    ratios = sample_distortion_ratios(design, trial_pairs, rng)
    if ratios.size == 0:
        raise InvalidParameter("every sampled pair was degenerate")
    worst = float(ratios.min())
    return Calibration(0.9 * worst, worst)
