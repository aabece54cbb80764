import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdcircuit import qsim
from qkdcircuit.cnot import CnotCircuit, synthesize
from qkdcircuit.gf2 import BitVec, all_bitvecs, random_full_rank
from qkdcircuit.qsim import StateVector

PLUS = np.array([1.0, 1.0]) / np.sqrt(2)
MINUS = np.array([1.0, -1.0]) / np.sqrt(2)


def random_hermitian(dim, rng):
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (A + A.conj().T) / 2


def test_state_validation():
    with pytest.raises(ValueError):
        StateVector(np.array([1.0, 1.0]), 1)
    with pytest.raises(ValueError):
        StateVector.from_amplitudes(np.ones(3), normalize=True)
    with pytest.raises(ValueError):
        StateVector.basis(BitVec.zeros(qsim.MAX_QUBITS + 1))


def test_cnot_examples():
    c = CnotCircuit(((0, 1),), 2)
    assert qsim.apply_circuit(StateVector.basis("10"), c).allclose(StateVector.basis("11"))
    assert qsim.apply_circuit(StateVector.basis("00"), c).allclose(StateVector.basis("00"))
    with pytest.raises(ValueError):
        qsim.apply_circuit(StateVector.basis("000"), c)


def test_synthesized_circuit_on_basis():
    M = random_full_rank(4, 4, seed=3)
    circ = synthesize(M)
    for x in all_bitvecs(4):
        assert qsim.apply_circuit(StateVector.basis(x), circ).allclose(StateVector.basis(M.matvec(x)))


def test_pauli_examples():
    psi = qsim.random_state(3, seed=1)
    assert qsim.apply_pauli(psi, "Z", BitVec.zeros(3)).allclose(psi)
    assert qsim.apply_pauli(StateVector.basis("00"), "X", BitVec.from_str("11")).allclose(StateVector.basis("11"))
    pp = StateVector.product(PLUS, PLUS)
    assert qsim.apply_pauli(pp, "Z", BitVec.from_str("10")).allclose(StateVector.product(MINUS, PLUS))
    with pytest.raises(ValueError):
        qsim.apply_pauli(pp, "Y", BitVec.from_str("10"))


def test_pauli_matches_kron():
    Z = np.diag([1.0, -1.0])
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    psi = qsim.random_state(3, seed=2)
    mask = BitVec.from_str("101")
    for axis, P in (("X", X), ("Z", Z)):
        op = np.kron(np.kron(P, np.eye(2)), P)
        np.testing.assert_allclose(qsim.apply_pauli(psi, axis, mask).amplitudes, op @ psi.amplitudes, atol=1e-12)


@given(st.integers(1, 6), st.integers(0, 2**32))
@settings(max_examples=50, deadline=None)
def test_norm_preservation(n, seed):
    rng = np.random.default_rng(seed)
    psi = qsim.random_state(n, rng)
    if n > 1:
        c, t = rng.choice(n, 2, replace=False)
        psi = qsim.apply_cnot(psi, int(c), int(t))
    psi = qsim.apply_pauli(psi, "Z", BitVec(int(rng.integers(1 << n)), n))
    psi = qsim.apply_pauli(psi, "X", BitVec(int(rng.integers(1 << n)), n))
    assert abs(psi.norm - 1) < 1e-12


def test_measure_examples():
    plus = StateVector.product(PLUS)
    assert np.allclose(qsim.outcome_distribution(plus, "Z", [0]), [0.5, 0.5])
    assert np.allclose(qsim.outcome_distribution(plus, "X", [0]), [1.0, 0.0])
    rec = qsim.measure(plus, "X", [0], seed=0)
    assert rec.outcome.value == 0 and rec.probability == pytest.approx(1.0)

    bell = StateVector.from_amplitudes(np.array([1, 0, 0, 1]) / np.sqrt(2))
    for seed in range(8):
        rec = qsim.measure(bell, "Z", [0], seed=seed)
        expected = "00" if rec.outcome.value == 0 else "11"
        assert rec.post_state.allclose(StateVector.basis(expected))


def test_measure_deterministic_per_seed():
    psi = qsim.random_state(4, seed=5)
    a = qsim.measure(psi, "X", [1, 3], seed=11)
    b = qsim.measure(psi, "X", [1, 3], seed=11)
    assert a.outcome == b.outcome and a.post_state.allclose(b.post_state)


@given(st.integers(1, 6), st.integers(0, 2**32), st.sampled_from(["X", "Z"]))
@settings(max_examples=50, deadline=None)
def test_branch_probabilities_sum_to_one(n, seed, basis):
    rng = np.random.default_rng(seed)
    psi = qsim.random_state(n, rng)
    k = int(rng.integers(1, n + 1))
    qubits = [int(q) for q in rng.choice(n, k, replace=False)]
    branches = qsim.measurement_branches(psi, basis, qubits)
    assert abs(sum(b.probability for b in branches) - 1) < 1e-12
    dist = qsim.outcome_distribution(psi, basis, qubits)
    for b in branches:
        assert b.probability == pytest.approx(dist[b.outcome.value], abs=1e-12)
        # post state is an eigenstate of the measured observable
        again = qsim.outcome_distribution(b.post_state, basis, qubits)
        assert again[b.outcome.value] == pytest.approx(1.0, abs=1e-12)


def test_discard():
    psi = StateVector.basis("101").tensor(StateVector.product(PLUS))
    rest = qsim.discard(psi, [0, 2], BitVec.from_str("11"))
    assert rest.allclose(StateVector.from_amplitudes(np.kron([1, 0], PLUS)))
    with pytest.raises(ValueError):
        qsim.discard(psi, [0], BitVec.from_str("0"))


def test_eig_examples():
    w, _ = qsim.eig_hermitian(np.diag([1.0, 0.0]))
    np.testing.assert_allclose(sorted(w), [0, 1])
    e = 0.2
    rho = np.array([[0.5, (1 - 2 * e) / 2], [(1 - 2 * e) / 2, 0.5]])
    w, _ = qsim.eig_hermitian(rho)
    np.testing.assert_allclose(sorted(w), [e, 1 - e], atol=1e-14)
    with pytest.raises(ValueError):
        qsim.eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


@pytest.mark.parametrize("dim", [2, 5, 16, 64])
def test_eig_reconstruction(dim):
    rng = np.random.default_rng(dim)
    A = random_hermitian(dim, rng)
    w, V = qsim.eig_hermitian(A)
    assert np.max(np.abs(A - (V * w) @ V.conj().T)) <= 1e-10
    assert np.all(np.diff(w) >= 0)


def test_inv_sqrt_examples():
    np.testing.assert_allclose(qsim.inv_sqrt_on_support(np.eye(3)), np.eye(3), atol=1e-14)
    np.testing.assert_allclose(qsim.inv_sqrt_on_support(np.diag([4.0, 0.0])), np.diag([0.5, 0.0]), atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_inv_sqrt_random_rank3(seed):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(8, 3)) + 1j * rng.normal(size=(8, 3))
    A = G @ G.conj().T
    B = qsim.inv_sqrt_on_support(A)
    BAB = B @ A @ B
    # projector onto the column space of G
    Q, _ = np.linalg.qr(G)
    assert np.max(np.abs(BAB - Q @ Q.conj().T)) <= 1e-9
    assert np.max(np.abs(BAB @ BAB - BAB)) <= 1e-9
    assert np.max(np.abs(A @ B - B @ A)) <= 1e-9
    np.testing.assert_allclose(qsim.support_projector(A), Q @ Q.conj().T, atol=1e-9)


def test_sqrt_psd():
    rng = np.random.default_rng(1)
    G = rng.normal(size=(5, 5))
    A = G @ G.T
    R = qsim.sqrt_psd(A)
    np.testing.assert_allclose(R @ R, A, atol=1e-9)


def test_fidelity_examples():
    psi = qsim.random_state(2, seed=3)
    assert qsim.fidelity(psi, psi.density()) == pytest.approx(1.0, abs=1e-12)
    assert qsim.fidelity(StateVector.basis("0"), StateVector.basis("1").density()) == pytest.approx(0.0)
    assert qsim.fidelity(StateVector.basis("0"), np.eye(2) / 2) == pytest.approx(0.5)
