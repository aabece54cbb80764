"""Dense statevector and Hermitian-operator kernels for small registers.

Qubit 0 is the most significant bit of the basis index, matching the
``BitVec`` string order, so ``|x>`` lives at index ``x.value``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cnot import CnotCircuit
from .gf2 import BitVec
from .rng import as_generator

MAX_QUBITS = 14
NORM_TOL = 1e-12
# eigenvalues below KERNEL_RTOL * lambda_max count as kernel
KERNEL_RTOL = 1e-10

_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def check_width(n: int) -> None:
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits exceeds the dense-simulation cap of {MAX_QUBITS}")


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    num_qubits: int

    def __post_init__(self) -> None:
        check_width(self.num_qubits)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 1 << self.num_qubits:
            raise ValueError(f"expected {1 << self.num_qubits} amplitudes, got {amps.size}")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state is not normalized (squared norm {norm})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amps, normalize: bool = False) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        n = amps.size.bit_length() - 1
        if amps.size != 1 << n:
            raise ValueError("amplitude count must be a power of two")
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(amps, n)

    @classmethod
    def basis(cls, x: BitVec | str) -> "StateVector":
        if isinstance(x, str):
            x = BitVec.from_str(x)
        check_width(x.length)
        amps = np.zeros(1 << x.length, dtype=complex)
        amps[x.value] = 1.0
        return cls(amps, x.length)

    @classmethod
    def product(cls, *factors) -> "StateVector":
        amps = np.ones(1, dtype=complex)
        for f in factors:
            amps = np.kron(amps, np.asarray(f, dtype=complex))
        return cls.from_amplitudes(amps)

    def tensor(self, other: "StateVector") -> "StateVector":
        return StateVector(np.kron(self.amplitudes, other.amplitudes), self.num_qubits + other.num_qubits)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def allclose(self, other: "StateVector", atol: float = 1e-12) -> bool:
        return self.num_qubits == other.num_qubits and np.allclose(
            self.amplitudes, other.amplitudes, atol=atol, rtol=0
        )


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    outcome: BitVec
    probability: float
    post_state: StateVector


def random_state(num_qubits: int, seed=None) -> StateVector:
    """Haar-random pure state."""
    rng = as_generator(seed)
    amps = rng.normal(size=1 << num_qubits) + 1j * rng.normal(size=1 << num_qubits)
    return StateVector.from_amplitudes(amps, normalize=True)


# ---------------------------------------------------------------------------
# gates


def _bit(idx: np.ndarray, q: int, n: int) -> np.ndarray:
    return (idx >> (n - 1 - q)) & 1


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    n = state.num_qubits
    idx = np.arange(1 << n)
    perm = idx ^ (_bit(idx, control, n) << (n - 1 - target))
    return StateVector(state.amplitudes[perm], n)


def apply_circuit(state: StateVector, circuit: CnotCircuit) -> StateVector:
    if circuit.width != state.num_qubits:
        raise ValueError(f"circuit width {circuit.width} != state width {state.num_qubits}")
    for c, t in circuit.gates:
        state = apply_cnot(state, c, t)
    return state


def apply_pauli(state: StateVector, axis: str, mask: BitVec) -> StateVector:
    """Apply ``X^mask`` or ``Z^mask``."""
    n = state.num_qubits
    if mask.length != n:
        raise ValueError("mask width mismatch")
    idx = np.arange(1 << n)
    axis = axis.upper()
    if axis == "X":
        return StateVector(state.amplitudes[idx ^ mask.value], n)
    if axis == "Z":
        signs = 1 - 2 * (np.bitwise_count(idx & mask.value) & 1).astype(int)
        return StateVector(state.amplitudes * signs, n)
    raise ValueError(f"unknown Pauli axis {axis!r}")


def apply_single(state: StateVector, matrix: np.ndarray, qubits) -> StateVector:
    """Apply the same one-qubit ``matrix`` to each listed qubit."""
    n = state.num_qubits
    psi = state.amplitudes.reshape([2] * n)
    for q in qubits:
        psi = np.moveaxis(np.tensordot(matrix, psi, axes=([1], [q])), 0, q)
    return StateVector(psi.reshape(-1), n)


def apply_hadamard(state: StateVector, qubits) -> StateVector:
    return apply_single(state, _H, qubits)


# ---------------------------------------------------------------------------
# measurement


def _check_qubits(qubits, n: int) -> list[int]:
    qubits = [int(q) for q in qubits]
    if len(set(qubits)) != len(qubits) or any(not 0 <= q < n for q in qubits):
        raise ValueError(f"invalid qubit list {qubits} for width {n}")
    return qubits


def _split(psi: np.ndarray, qubits: list[int], n: int) -> np.ndarray:
    """View the amplitudes as (2^|qubits|, 2^(rest)) with measured qubits first."""
    rest = [q for q in range(n) if q not in qubits]
    t = np.transpose(psi.reshape([2] * n), qubits + rest)
    return t.reshape(1 << len(qubits), -1), rest


def outcome_distribution(state: StateVector, basis: str, qubits) -> np.ndarray:
    """Born-rule probabilities of every outcome, indexed by the outcome value."""
    n = state.num_qubits
    qubits = _check_qubits(qubits, n)
    if basis.upper() == "X":
        state = apply_hadamard(state, qubits)
    block, _ = _split(state.amplitudes, qubits, n)
    return np.sum(np.abs(block) ** 2, axis=1)


def measurement_branches(state: StateVector, basis: str, qubits, *, min_prob: float = 0.0):
    """Every outcome with probability above ``min_prob``, with post-measurement states."""
    n = state.num_qubits
    qubits = _check_qubits(qubits, n)
    basis = basis.upper()
    if basis not in ("X", "Z"):
        raise ValueError(f"unknown basis {basis!r}")
    rotated = apply_hadamard(state, qubits) if basis == "X" else state
    block, rest = _split(rotated.amplitudes, qubits, n)
    probs = np.sum(np.abs(block) ** 2, axis=1)
    order = qubits + rest
    inverse = np.argsort(order)
    records = []
    for o, p in enumerate(probs):
        if p <= min_prob:
            continue
        post = np.zeros_like(block)
        post[o] = block[o] / np.sqrt(p)
        amps = np.transpose(post.reshape([2] * n), inverse).reshape(-1)
        post_state = StateVector(amps, n)
        if basis == "X":
            post_state = apply_hadamard(post_state, qubits)
        records.append(MeasurementRecord(BitVec(o, len(qubits)), float(p), post_state))
    return records


def measure(state: StateVector, basis: str, qubits, seed=None) -> MeasurementRecord:
    """Sample one outcome by the Born rule; deterministic for a fixed seed."""
    rng = as_generator(seed)
    branches = measurement_branches(state, basis, qubits)
    probs = np.array([b.probability for b in branches])
    k = rng.choice(len(branches), p=probs / probs.sum())
    return branches[k]


def discard(state: StateVector, qubits, outcome: BitVec, basis: str = "Z") -> StateVector:
    """Drop measured qubits that are known to sit in the eigenstate ``outcome``.

    The remaining qubits keep their relative order.
    """
    n = state.num_qubits
    qubits = _check_qubits(qubits, n)
    if basis.upper() == "X":
        state = apply_hadamard(state, qubits)
    block, _ = _split(state.amplitudes, qubits, n)
    rest = block[outcome.value]
    norm = np.linalg.norm(rest)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError("qubits are not in the stated eigenstate")
    return StateVector(rest / norm, n - len(qubits))


# ---------------------------------------------------------------------------
# operators


def is_hermitian(A: np.ndarray, atol: float = 1e-12) -> bool:
    A = np.asarray(A)
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    return A.ndim == 2 and A.shape[0] == A.shape[1] and np.allclose(A, A.conj().T, atol=atol * scale, rtol=0)


def eig_hermitian(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and column eigenvectors of a Hermitian matrix."""
    A = np.asarray(A)
    if not is_hermitian(A):
        raise ValueError("matrix is not Hermitian")
    A = (A + A.conj().T) / 2
    w, V = np.linalg.eigh(A)
    return w, V


def _support_cutoff(w: np.ndarray) -> float:
    top = float(np.max(w)) if w.size else 0.0
    return KERNEL_RTOL * top if top > 0 else np.inf


def inv_sqrt_on_support(A: np.ndarray) -> np.ndarray:
    """Pseudo inverse square root: ``B A B`` is the projector onto ``supp(A)``."""
    w, V = eig_hermitian(A)
    keep = w > _support_cutoff(w)
    scaled = np.zeros_like(w)
    scaled[keep] = 1.0 / np.sqrt(w[keep])
    return (V * scaled) @ V.conj().T


def sqrt_psd(A: np.ndarray) -> np.ndarray:
    w, V = eig_hermitian(A)
    # rounding noise below the support cutoff would otherwise be amplified by the root
    root = np.where(w > _support_cutoff(w), np.sqrt(np.clip(w, 0.0, None)), 0.0)
    return (V * root) @ V.conj().T


def support_projector(A: np.ndarray) -> np.ndarray:
    w, V = eig_hermitian(A)
    Vk = V[:, w > _support_cutoff(w)]
    return Vk @ Vk.conj().T


def fidelity(state: StateVector, sigma: np.ndarray) -> float:
    """``<psi| sigma |psi>`` for a pure ``state`` and density operator ``sigma``."""
    sigma = np.asarray(sigma)
    if sigma.shape != (1 << state.num_qubits,) * 2:
        raise ValueError("dimension mismatch")
    psi = state.amplitudes
    return float(np.real(np.vdot(psi, sigma @ psi)))
