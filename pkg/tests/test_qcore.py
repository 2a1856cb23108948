import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmllab.errors import DimensionError, InvalidKey, InvalidParameter, InvalidState
from qmllab.families import conditional_phase_family, entangled_rotation_family
from qmllab.qcore import (
    CircuitFamily,
    DensityMatrix,
    GateOp,
    PureState,
    apply_gate,
    family_states,
    fidelity,
    fidelity_matrix,
    frobenius_distance,
    generate_state,
    index_to_key,
    key_to_index,
    random_pure_state,
    trace_distance_mixed,
    trace_distance_pure,
)

SQ2 = 1 / math.sqrt(2)


def _dm(vec):
    v = np.asarray(vec, dtype=complex)
    return DensityMatrix(np.outer(v, v.conj()), int(math.log2(v.size)))


def _eig_trace_norm(m):
    # independent oracle: singular values instead of eigenvalues
    return float(np.linalg.svd(m, compute_uv=False).sum())


def test_empty_program_gives_zero_state():
    fam = CircuitFamily(3, 2, ())
    for key in fam.keys():
        amps = generate_state(fam, key).amplitudes
        assert amps[0] == 1 and np.count_nonzero(amps) == 1


def test_conditional_hadamard():
    fam = CircuitFamily(1, 1, (GateOp("H", 0, cond_key_bit=0),))
    np.testing.assert_allclose(generate_state(fam, "1").amplitudes, [SQ2, SQ2], atol=1e-12)
    np.testing.assert_allclose(generate_state(fam, "0").amplitudes, [1, 0], atol=1e-12)


def test_bell_state():
    fam = CircuitFamily(2, 0, (GateOp("H", 0), GateOp("CNOT", 1, control=0)))
    np.testing.assert_allclose(generate_state(fam, "").amplitudes, [SQ2, 0, 0, SQ2], atol=1e-12)


@pytest.mark.parametrize("gate, expected", [
    (GateOp("X", 1), [0, 1, 0, 0]),
    (GateOp("X", 0), [0, 0, 1, 0]),
])
def test_qubit_zero_is_most_significant(gate, expected):
    fam = CircuitFamily(2, 0, (gate,))
    np.testing.assert_allclose(generate_state(fam, "").amplitudes, expected)


def test_gates_match_kronecker_products():
    # oracle: build each full unitary with np.kron and compare
    rng = np.random.default_rng(3)
    n = 3
    psi = random_pure_state(n, rng)
    I2 = np.eye(2)
    H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    S = np.diag([1, 1j])
    theta = 0.37
    RY = np.array([[math.cos(theta / 2), -math.sin(theta / 2)],
                   [math.sin(theta / 2), math.cos(theta / 2)]])

    def embed(m, q):
        ops = [I2] * n
        ops[q] = m
        out = ops[0]
        for o in ops[1:]:
            out = np.kron(out, o)
        return out

    def controlled(m, c, t):
        P0, P1 = np.diag([1, 0]), np.diag([0, 1])
        a = [I2] * n
        b = [I2] * n
        a[c], b[c], b[t] = P0, P1, m
        ka, kb = a[0], b[0]
        for x, y in zip(a[1:], b[1:]):
            ka, kb = np.kron(ka, x), np.kron(kb, y)
        return ka + kb

    cases = [
        (GateOp("H", 1), embed(H, 1)),
        (GateOp("S", 2), embed(S, 2)),
        (GateOp("RY", 0, angle=theta), embed(RY, 0)),
        (GateOp("CNOT", 0, control=2), controlled(np.array([[0, 1], [1, 0]]), 2, 0)),
        (GateOp("CNOT", 2, control=0), controlled(np.array([[0, 1], [1, 0]]), 0, 2)),
        (GateOp("CZ", 1, control=0), controlled(np.diag([1, -1]), 0, 1)),
    ]
    for gate, U in cases:
        fam = CircuitFamily.from_dict({"num_qubits": n, "key_bits": 0, "gates": [gate.to_dict()]})
        got = apply_gate(psi.amplitudes.copy(), gate, n)
        np.testing.assert_allclose(got, U @ psi.amplitudes, atol=1e-12, err_msg=gate.kind)
        assert fam.gates[0] == gate


def test_key_length_mismatch():
    fam = conditional_phase_family(3, 4)
    with pytest.raises(InvalidKey):
        generate_state(fam, "101")
    with pytest.raises(InvalidKey):
        generate_state(fam, "10a1")


@pytest.mark.parametrize("kwargs", [
    {"kind": "H", "target": 0, "control": 0},
    {"kind": "RZ", "target": 0},
    {"kind": "CNOT", "target": 1},
    {"kind": "FOO", "target": 0},
])
def test_invalid_gate(kwargs):
    with pytest.raises(InvalidParameter):
        GateOp(**kwargs)


def test_family_rejects_out_of_range_indices():
    with pytest.raises(InvalidParameter):
        CircuitFamily(2, 1, (GateOp("X", 2),))
    with pytest.raises(InvalidParameter):
        CircuitFamily(2, 1, (GateOp("X", 0, cond_key_bit=1),))


def test_key_index_order_is_lexicographic():
    keys = [index_to_key(i, 4) for i in range(16)]
    assert keys == sorted(keys)
    assert all(key_to_index(k, 4) == i for i, k in enumerate(keys))


@pytest.mark.parametrize("family", [conditional_phase_family(3, 4),
                                    entangled_rotation_family(3, 6, seed=2)])
def test_norm_preservation(family):
    for key in family.keys():
        assert abs(np.linalg.norm(generate_state(family, key).amplitudes) - 1) < 1e-10


def test_serialization_round_trip_is_bit_exact():
    fam = entangled_rotation_family(3, 5, seed=11)
    text = fam.to_json()
    back = CircuitFamily.from_json(text)
    assert back == fam
    assert back.to_json() == text
    for g0, g1 in zip(json.loads(text)["gates"], back.to_dict()["gates"]):
        assert g0 == g1


def test_pure_state_validation():
    with pytest.raises(InvalidState):
        PureState(np.array([1, 1], dtype=complex), 1)
    with pytest.raises(InvalidState):
        PureState(np.array([1, 0, 0], dtype=complex), 1)


def test_density_matrix_validation():
    with pytest.raises(InvalidState):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]], dtype=complex), 1)
    with pytest.raises(InvalidState):
        DensityMatrix(np.diag([1.5, -0.5]).astype(complex), 1)


@pytest.mark.parametrize("a, b, expected", [
    ([1, 0], [1, 0], 1.0),
    ([1, 0], [0, 1], 0.0),
    ([1, 0], [SQ2, SQ2], 0.5),
])
def test_fidelity_examples(a, b, expected):
    assert fidelity(PureState.from_vector(a), PureState.from_vector(b)) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("a, b, expected", [
    ([1, 0], [1, 0], 0.0),
    ([1, 0], [0, 1], 1.0),
    ([1, 0], [SQ2, SQ2], math.sqrt(0.5)),
])
def test_trace_distance_pure_examples(a, b, expected):
    got = trace_distance_pure(PureState.from_vector(a), PureState.from_vector(b))
    assert got == pytest.approx(expected, abs=1e-12)
    ev = np.linalg.eigvalsh(_dm(a).entries - _dm(b).entries)
    assert got == pytest.approx(0.5 * np.abs(ev).sum(), abs=1e-12)


def test_frobenius_examples():
    assert frobenius_distance(_dm([1, 0]), _dm([1, 0])) == 0
    assert frobenius_distance(_dm([1, 0]), _dm([0, 1])) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_trace_distance_mixed_examples():
    rho = _dm([SQ2, 1j * SQ2])
    assert trace_distance_mixed(rho, rho) == pytest.approx(0, abs=1e-12)
    assert trace_distance_mixed(_dm([1, 0]), _dm([0, 1])) == pytest.approx(1, abs=1e-12)


def test_dimension_errors():
    a, b = PureState.basis(0, 1), PureState.basis(0, 2)
    with pytest.raises(DimensionError):
        fidelity(a, b)
    with pytest.raises(DimensionError):
        trace_distance_pure(a, b)
    with pytest.raises(DimensionError):
        frobenius_distance(a.density_matrix(), b.density_matrix())
    with pytest.raises(DimensionError):
        trace_distance_mixed(a.density_matrix(), b.density_matrix())


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_pure_pair_metric_identities(n, seed):
    rng = np.random.default_rng(seed)
    a, b = random_pure_state(n, rng), random_pure_state(n, rng)
    td, f = trace_distance_pure(a, b), fidelity(a, b)
    assert td**2 + f == pytest.approx(1, abs=1e-9)
    ra, rb = a.density_matrix(), b.density_matrix()
    diff = ra.entries - rb.entries
    assert _eig_trace_norm(diff) == pytest.approx(math.sqrt(2) * frobenius_distance(ra, rb), abs=1e-9)
    assert trace_distance_mixed(ra, rb) == pytest.approx(td, abs=1e-9)


def _random_mixed(n, rng, rank=2):
    vs = [random_pure_state(n, rng).amplitudes for _ in range(rank)]
    w = rng.dirichlet(np.ones(rank))
    m = sum(wi * np.outer(v, v.conj()) for wi, v in zip(w, vs))
    return DensityMatrix(m, n)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_trace_distance_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (_random_mixed(2, rng) for _ in range(3))
    assert trace_distance_mixed(a, b) == trace_distance_mixed(b, a)
    assert trace_distance_mixed(a, c) <= trace_distance_mixed(a, b) + trace_distance_mixed(b, c) + 1e-9


def test_phase_family_is_well_separated():
    s = family_states(conditional_phase_family(3, 4))
    F = fidelity_matrix(s, s)
    np.testing.assert_allclose(np.diag(F), 1, atol=1e-12)
    assert (F - np.eye(16)).max() == pytest.approx(0.5, abs=1e-12)
