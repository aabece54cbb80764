"""CNOT circuits as invertible GF(2) maps.

A CNOT with control ``c`` and target ``t`` sends the computational label
``x`` to ``x`` with ``x_t ^= x_c``.  On X-basis labels the roles swap, so a
circuit with Z-map ``M`` acts on X-eigenstate labels as ``(M^-1)^T``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .gf2 import (
    BitMatrix,
    BitVec,
    LinearCode,
    complete_basis,
    invert,
    null_space,
    random_full_rank,
    rank,
    right_inverse,
)


@dataclass(frozen=True)
class CnotCircuit:
    gates: tuple[tuple[int, int], ...]
    width: int

    def __post_init__(self) -> None:
        gates = tuple((int(c), int(t)) for c, t in self.gates)
        for c, t in gates:
            if c == t:
                raise ValueError(f"CNOT control and target coincide ({c})")
            if not (0 <= c < self.width and 0 <= t < self.width):
                raise ValueError(f"gate ({c}, {t}) out of range for width {self.width}")
        object.__setattr__(self, "gates", gates)

    def __len__(self) -> int:
        return len(self.gates)

    def apply_to_label(self, x: BitVec) -> BitVec:
        """Classical action on a computational-basis label."""
        if x.length != self.width:
            raise ValueError("width mismatch")
        v, n = x.value, self.width
        for c, t in self.gates:
            if (v >> (n - 1 - c)) & 1:
                v ^= 1 << (n - 1 - t)
        return BitVec(v, n)

    def z_map(self) -> BitMatrix:
        n = self.width
        rows = list(BitMatrix.identity(n).rows)
        for c, t in self.gates:
            rows[t] ^= rows[c]
        return BitMatrix(tuple(rows), n)

    def x_map(self) -> BitMatrix:
        return x_basis_map(self)

    def inverse(self) -> "CnotCircuit":
        return CnotCircuit(tuple(reversed(self.gates)), self.width)

    def then(self, other: "CnotCircuit") -> "CnotCircuit":
        if other.width != self.width:
            raise ValueError("width mismatch")
        return CnotCircuit(self.gates + other.gates, self.width)

    # serialization: "width N" header, then one "c <control> <target>" per gate
    def dumps(self) -> str:
        lines = [f"width {self.width}"]
        lines += [f"c {c} {t}" for c, t in self.gates]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "CnotCircuit":
        width = None
        gates = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "width" and len(parts) == 2 and width is None:
                width = int(parts[1])
            elif parts[0] == "c" and len(parts) == 3:
                gates.append((int(parts[1]), int(parts[2])))
            else:
                raise ValueError(f"line {lineno}: cannot parse {raw!r}")
        if width is None:
            raise ValueError("missing 'width N' header")
        return cls(tuple(gates), width)


@dataclass(frozen=True)
class LinearMapPair:
    z_map: BitMatrix
    x_map: BitMatrix

    @classmethod
    def of(cls, circuit: CnotCircuit) -> "LinearMapPair":
        z = circuit.z_map()
        return cls(z, invert(z).T)


def synthesize(M: BitMatrix) -> CnotCircuit:
    """CNOT list realizing ``|x> -> |M x>`` via Gauss-Jordan elimination.

    Each row operation ``row_t ^= row_c`` is a CNOT(c -> t); reducing ``M``
    to the identity with ops ``E_1..E_r`` gives ``M = E_1 ... E_r``, so the
    circuit runs the ops in reverse.
    """
    n = M.nrows
    if M.ncols != n:
        raise ValueError(f"cannot synthesize a non-square {M.shape} map")
    rows = list(M.rows)
    ops: list[tuple[int, int]] = []
    for col in range(n):
        bit = 1 << (n - 1 - col)
        if not rows[col] & bit:
            donor = next((i for i in range(col + 1, n) if rows[i] & bit), None)
            if donor is None:
                raise ValueError("matrix is singular over GF(2)")
            rows[col] ^= rows[donor]
            ops.append((donor, col))
        for i in range(n):
            if i != col and rows[i] & bit:
                rows[i] ^= rows[col]
                ops.append((col, i))
    return CnotCircuit(tuple(reversed(ops)), n)


def x_basis_map(circuit: CnotCircuit) -> BitMatrix:
    """Action on X-eigenstate labels: ``|b>_x -> |N b>_x`` with ``N = (M^-1)^T``."""
    return invert(circuit.z_map()).T


# ---------------------------------------------------------------------------
# protocol circuits


@dataclass(frozen=True)
class SyndromeCircuit:
    """CNOT(I): the last ``s`` output ports carry the syndrome ``H x``.

    The first ``n`` ports carry ``x`` at ``key_positions`` (a lexicographically
    first unit-vector completion of ``H``), so discarding the syndrome ports
    is the same as dropping the other ``s`` sifted bits.
    """

    circuit: CnotCircuit
    z_map: BitMatrix
    key_positions: tuple[int, ...]
    s: int

    @property
    def n(self) -> int:
        return self.circuit.width - self.s

    @property
    def x_map(self) -> BitMatrix:
        return invert(self.z_map).T


def build_cnot1(code: LinearCode) -> SyndromeCircuit:
    H = code.parity_check
    completion = complete_basis(H)
    positions = tuple(H.ncols - 1 - (r.bit_length() - 1) for r in completion.rows)
    z = completion.vstack(H)
    return SyndromeCircuit(synthesize(z), z, positions, H.nrows)


def hashing_ports(n: int, m: int) -> list[int]:
    """CNOT(II) output ports measured in the X basis."""
    return list(range(m))


def key_ports(n: int, m: int) -> list[int]:
    """CNOT(II) output ports measured in the Z basis (final key)."""
    return list(range(m, n))


def check_hash_pair(U: BitMatrix, V: BitMatrix) -> None:
    if U.ncols != V.ncols:
        raise ValueError("U and V must have the same number of columns")
    n, m = U.ncols, U.nrows
    if V.nrows != n - m:
        raise ValueError(f"expected {n - m} privacy-amplification rows, got {V.nrows}")
    if rank(U) != m:
        raise ValueError("hashing rows are linearly dependent")
    if rank(V) != V.nrows:
        raise ValueError("privacy-amplification rows are linearly dependent")
    if not (U @ V.T).is_zero():
        raise ValueError("every hashing row must be orthogonal to every privacy-amplification row")


def build_cnot2(U: BitMatrix, V: BitMatrix) -> CnotCircuit:
    """CNOT(II) for hashing rows ``U`` (m x n) and key rows ``V`` ((n-m) x n).

    X-measuring output ports ``0..m-1`` reads ``U_i . b`` of the input X
    label ``b``; Z-measuring ports ``m..n-1`` reads ``V_k . x`` of the input
    Z label ``x``.  The Z-map is ``[A; V]`` with ``U A^T = I``.
    """
    check_hash_pair(U, V)
    A = right_inverse(U).T if U.nrows else BitMatrix((), U.ncols)
    return synthesize(A.vstack(V))


def random_hashing_circuit(n: int, m: int, seed=None) -> tuple[CnotCircuit, BitMatrix, BitMatrix]:
    """Random CNOT(II): ``U`` uniform among rank-``m`` matrices, ``V`` spans its orthogonal complement."""
    if not 0 <= m < n:
        raise ValueError(f"need 0 <= m < n, got m={m}, n={n}")
    U = random_full_rank(m, n, seed) if m else BitMatrix((), n)
    V = null_space(U)
    return build_cnot2(U, V), U, V


def circuit_from_gates(gates: Iterable[Sequence[int]], width: int) -> CnotCircuit:
    return CnotCircuit(tuple((c, t) for c, t in gates), width)
