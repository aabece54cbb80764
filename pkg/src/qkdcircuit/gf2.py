"""Bit-packed linear algebra over GF(2).

Conventions used across the package:

* A :class:`BitVec` of length ``N`` is stored as a Python ``int``; bit ``i``
  (index 0 is the leftmost character of the 0/1 string form) sits at
  position ``N - 1 - i`` of the integer.  The integer value is therefore also
  the computational-basis index of ``|x>`` in a big-endian statevector.
* Vectors are columns.  ``M @ x`` applies each row of ``M`` as a parity.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .rng import as_generator

MAX_BALL_SIZE = 1 << 20


def _parity(v: int) -> int:
    return v.bit_count() & 1


@dataclass(frozen=True)
class BitVec:
    """Fixed-length bit string over GF(2)."""

    value: int
    length: int

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ValueError("length must be non-negative")
        if self.value < 0 or self.value >> self.length:
            raise ValueError(f"value {self.value} does not fit in {self.length} bits")

    @classmethod
    def from_str(cls, s: str) -> "BitVec":
        s = s.strip()
        if any(c not in "01" for c in s):
            raise ValueError(f"not a 0/1 string: {s!r}")
        return cls(int(s, 2) if s else 0, len(s))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitVec":
        bits = [int(b) for b in bits]
        if any(b not in (0, 1) for b in bits):
            raise ValueError("bits must be 0 or 1")
        value = 0
        for b in bits:
            value = (value << 1) | b
        return cls(value, len(bits))

    @classmethod
    def zeros(cls, length: int) -> "BitVec":
        return cls(0, length)

    @classmethod
    def unit(cls, length: int, index: int) -> "BitVec":
        return cls(1 << (length - 1 - index), length)

    def __str__(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not -self.length <= i < self.length:
            raise IndexError(i)
        i %= self.length
        return (self.value >> (self.length - 1 - i)) & 1

    def __iter__(self) -> Iterator[int]:
        return iter(self.bits())

    def bits(self) -> list[int]:
        return [(self.value >> (self.length - 1 - i)) & 1 for i in range(self.length)]

    def _check(self, other: "BitVec") -> None:
        if self.length != other.length:
            raise ValueError(f"length mismatch: {self.length} vs {other.length}")

    def __xor__(self, other: "BitVec") -> "BitVec":
        self._check(other)
        return BitVec(self.value ^ other.value, self.length)

    def __and__(self, other: "BitVec") -> "BitVec":
        self._check(other)
        return BitVec(self.value & other.value, self.length)

    def dot(self, other: "BitVec") -> int:
        self._check(other)
        return _parity(self.value & other.value)

    @property
    def weight(self) -> int:
        return self.value.bit_count()

    def take(self, indices: Sequence[int]) -> "BitVec":
        """Sub-vector at ``indices`` (in the given order)."""
        return BitVec.from_bits(self[i] for i in indices)

    def head(self, k: int) -> "BitVec":
        """First ``k`` bits."""
        if not 0 <= k <= self.length:
            raise ValueError(f"cannot take {k} bits of a length-{self.length} vector")
        return BitVec(self.value >> (self.length - k), k)

    def concat(self, other: "BitVec") -> "BitVec":
        return BitVec((self.value << other.length) | other.value, self.length + other.length)


@dataclass(frozen=True)
class BitMatrix:
    """Dense GF(2) matrix; each row is packed into an ``int`` of width ``ncols``."""

    rows: tuple[int, ...]
    ncols: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(int(r) for r in self.rows))
        for r in self.rows:
            if r < 0 or r >> self.ncols:
                raise ValueError(f"row {r} does not fit in {self.ncols} columns")

    # construction -------------------------------------------------------
    @classmethod
    def from_lists(cls, rows: Sequence[Sequence[int]], ncols: int | None = None) -> "BitMatrix":
        rows = [list(r) for r in rows]
        if ncols is None:
            if not rows:
                raise ValueError("ncols required for an empty matrix")
            ncols = len(rows[0])
        if any(len(r) != ncols for r in rows):
            raise ValueError("ragged rows")
        return cls(tuple(BitVec.from_bits(r).value for r in rows), ncols)

    @classmethod
    def from_bitvecs(cls, vecs: Sequence[BitVec], ncols: int | None = None) -> "BitMatrix":
        if ncols is None:
            if not vecs:
                raise ValueError("ncols required for an empty matrix")
            ncols = vecs[0].length
        if any(v.length != ncols for v in vecs):
            raise ValueError("row length mismatch")
        return cls(tuple(v.value for v in vecs), ncols)

    @classmethod
    def from_array(cls, a: np.ndarray) -> "BitMatrix":
        a = np.asarray(a)
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls.from_lists((a % 2).astype(int).tolist(), a.shape[1])

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(tuple(1 << (n - 1 - i) for i in range(n)), n)

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "BitMatrix":
        return cls((0,) * nrows, ncols)

    # shape / access -----------------------------------------------------
    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    def row(self, i: int) -> BitVec:
        return BitVec(self.rows[i], self.ncols)

    def entry(self, i: int, j: int) -> int:
        return (self.rows[i] >> (self.ncols - 1 - j)) & 1

    def to_array(self) -> np.ndarray:
        return np.array([BitVec(r, self.ncols).bits() for r in self.rows], dtype=np.uint8).reshape(
            self.nrows, self.ncols
        )

    def to_lists(self) -> list[list[int]]:
        return self.to_array().tolist()

    def __str__(self) -> str:
        return "\n".join(str(self.row(i)) for i in range(self.nrows))

    # algebra ------------------------------------------------------------
    def matvec(self, x: BitVec) -> BitVec:
        if x.length != self.ncols:
            raise ValueError(f"dimension mismatch: matrix has {self.ncols} columns, vector has {x.length}")
        value = 0
        for r in self.rows:
            value = (value << 1) | _parity(r & x.value)
        return BitVec(value, self.nrows)

    def __matmul__(self, other):
        if isinstance(other, BitVec):
            return self.matvec(other)
        if not isinstance(other, BitMatrix):
            return NotImplemented
        if self.ncols != other.nrows:
            raise ValueError(f"dimension mismatch: {self.shape} @ {other.shape}")
        rows = []
        for r in self.rows:
            acc = 0
            for j in range(self.ncols):
                if (r >> (self.ncols - 1 - j)) & 1:
                    acc ^= other.rows[j]
            rows.append(acc)
        return BitMatrix(tuple(rows), other.ncols)

    def transpose(self) -> "BitMatrix":
        rows = []
        for j in range(self.ncols):
            shift = self.ncols - 1 - j
            value = 0
            for r in self.rows:
                value = (value << 1) | ((r >> shift) & 1)
            rows.append(value)
        return BitMatrix(tuple(rows), self.nrows)

    @property
    def T(self) -> "BitMatrix":
        return self.transpose()

    def vstack(self, other: "BitMatrix") -> "BitMatrix":
        if self.ncols != other.ncols:
            raise ValueError("column mismatch")
        return BitMatrix(self.rows + other.rows, self.ncols)

    def take_rows(self, indices: Sequence[int]) -> "BitMatrix":
        return BitMatrix(tuple(self.rows[i] for i in indices), self.ncols)

    def is_zero(self) -> bool:
        return not any(self.rows)

    def is_identity(self) -> bool:
        return self.nrows == self.ncols and self == BitMatrix.identity(self.ncols)

    def rank(self) -> int:
        return rank(self)

    def inverse(self) -> "BitMatrix":
        return invert(self)


@dataclass(frozen=True)
class LinearCode:
    """Binary linear code given by its parity-check matrix."""

    parity_check: BitMatrix

    def __post_init__(self) -> None:
        if rank(self.parity_check) != self.parity_check.nrows:
            raise ValueError("parity-check rows must be linearly independent")

    @property
    def s(self) -> int:
        return self.parity_check.nrows

    @property
    def length(self) -> int:
        return self.parity_check.ncols


@dataclass(frozen=True)
class CandidateSet:
    """Duplicate-free, order-preserving collection of equal-length bit strings."""

    members: tuple[BitVec, ...]
    label: str = ""

    def __post_init__(self) -> None:
        members = tuple(dict.fromkeys(self.members))
        if len({m.length for m in members}) > 1:
            raise ValueError("candidate strings must share one length")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[BitVec]:
        return iter(self.members)

    def __contains__(self, x: object) -> bool:
        return x in self.members

    @property
    def width(self) -> int:
        return self.members[0].length if self.members else 0


# ---------------------------------------------------------------------------
# operations


def syndrome(code: LinearCode | BitMatrix, x: BitVec) -> BitVec:
    """Parity-check syndrome ``H x`` over GF(2)."""
    H = code.parity_check if isinstance(code, LinearCode) else code
    return H.matvec(x)


def _echelon(rows: list[int], ncols: int) -> tuple[list[int], list[int]]:
    """Reduced row echelon form; returns (nonzero rows, pivot columns)."""
    work = list(rows)
    pivots: list[int] = []
    r = 0
    for col in range(ncols):
        bit = 1 << (ncols - 1 - col)
        pivot = next((i for i in range(r, len(work)) if work[i] & bit), None)
        if pivot is None:
            continue
        work[r], work[pivot] = work[pivot], work[r]
        for i in range(len(work)):
            if i != r and work[i] & bit:
                work[i] ^= work[r]
        pivots.append(col)
        r += 1
        if r == len(work):
            break
    return work[:r], pivots


def rank(M: BitMatrix) -> int:
    """GF(2) rank by Gaussian elimination."""
    return len(_echelon(list(M.rows), M.ncols)[1])


def invert(M: BitMatrix) -> BitMatrix:
    """Inverse of a square full-rank matrix; raises ``ValueError`` if singular."""
    n = M.nrows
    if M.ncols != n:
        raise ValueError(f"cannot invert a non-square {M.shape} matrix")
    # augmented rows: [M | I] packed as (row << n) | e_i
    work = [(M.rows[i] << n) | (1 << (n - 1 - i)) for i in range(n)]
    for col in range(n):
        bit = 1 << (2 * n - 1 - col)
        pivot = next((i for i in range(col, n) if work[i] & bit), None)
        if pivot is None:
            raise ValueError("matrix is singular over GF(2)")
        work[col], work[pivot] = work[pivot], work[col]
        for i in range(n):
            if i != col and work[i] & bit:
                work[i] ^= work[col]
    mask = (1 << n) - 1
    return BitMatrix(tuple(w & mask for w in work), n)


def row_basis(M: BitMatrix) -> BitMatrix:
    """Reduced-echelon basis of the row space."""
    rows, _ = _echelon(list(M.rows), M.ncols)
    return BitMatrix(tuple(rows), M.ncols)


def null_space(M: BitMatrix) -> BitMatrix:
    """Basis (as rows) of ``{v : M v = 0}``, in canonical RREF-derived order."""
    n = M.ncols
    rows, pivots = _echelon(list(M.rows), n)
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        v = 1 << (n - 1 - f)
        for r, p in zip(rows, pivots):
            if (r >> (n - 1 - f)) & 1:
                v |= 1 << (n - 1 - p)
        basis.append(v)
    return BitMatrix(tuple(basis), n)


def complete_basis(M: BitMatrix) -> BitMatrix:
    """Unit vectors that extend the (independent) rows of ``M`` to a basis.

    Candidates ``e_0, e_1, ...`` are tried in order, so the completion is the
    lexicographically first one.
    """
    n = M.ncols
    if rank(M) != M.nrows:
        raise ValueError("rows must be linearly independent")
    extra: list[int] = []
    current = list(M.rows)
    r = len(current)
    for i in range(n):
        if r == n:
            break
        e = 1 << (n - 1 - i)
        if len(_echelon(current + [e], n)[1]) > r:
            current.append(e)
            extra.append(e)
            r += 1
    return BitMatrix(tuple(extra), n)


def right_inverse(U: BitMatrix) -> BitMatrix:
    """Matrix ``A`` (ncols x nrows) with ``U @ A = I`` for full-row-rank ``U``.

    Uses the pivot columns of ``U``; rows of ``A`` outside the pivots are zero.
    """
    m, n = U.shape
    _, pivots = _echelon(list(U.rows), n)
    if len(pivots) != m:
        raise ValueError("matrix must have full row rank")
    sub = BitMatrix(tuple(BitVec(r, n).take(pivots).value for r in U.rows), m)
    sub_inv = invert(sub)
    rows = [0] * n
    for k, p in enumerate(pivots):
        rows[p] = sub_inv.rows[k]
    return BitMatrix(tuple(rows), m)


def random_bitvec(length: int, seed=None) -> BitVec:
    rng = as_generator(seed)
    return BitVec.from_bits(rng.integers(0, 2, size=length).tolist())


def random_matrix(rows: int, cols: int, seed=None) -> BitMatrix:
    """Uniformly random ``rows x cols`` matrix (no rank condition)."""
    rng = as_generator(seed)
    return BitMatrix.from_lists(rng.integers(0, 2, size=(rows, cols)).tolist(), cols)


def random_full_rank(rows: int, cols: int, seed=None) -> BitMatrix:
    """Uniformly random matrix of rank ``rows``, drawn row by row with rejection."""
    if rows > cols:
        raise ValueError(f"cannot have rank {rows} with {cols} columns")
    rng = as_generator(seed)
    chosen: list[int] = []
    while len(chosen) < rows:
        candidate = BitVec.from_bits(rng.integers(0, 2, size=cols).tolist()).value
        if len(_echelon(chosen + [candidate], cols)[1]) > len(chosen):
            chosen.append(candidate)
    return BitMatrix(tuple(chosen), cols)


def hamming_ball_size(length: int, radius: int) -> int:
    return sum(math.comb(length, k) for k in range(0, min(radius, length) + 1))


def iter_hamming_ball(center: BitVec, radius: int) -> Iterator[BitVec]:
    """Yield strings within Hamming distance ``radius``, by increasing distance."""
    n = center.length
    for k in range(0, min(radius, n) + 1):
        for positions in itertools.combinations(range(n), k):
            flip = 0
            for p in positions:
                flip |= 1 << (n - 1 - p)
            yield BitVec(center.value ^ flip, n)


def hamming_ball(center: BitVec, radius: int, label: str = "") -> CandidateSet:
    """Materialized Hamming ball; refuses to build more than ``MAX_BALL_SIZE`` strings."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius > center.length:
        raise ValueError(f"radius {radius} exceeds length {center.length}")
    size = hamming_ball_size(center.length, radius)
    if size > MAX_BALL_SIZE:
        raise ValueError(f"Hamming ball of {size} strings exceeds the cap of {MAX_BALL_SIZE}")
    return CandidateSet(tuple(iter_hamming_ball(center, radius)), label)


def all_bitvecs(length: int) -> Iterator[BitVec]:
    for v in range(1 << length):
        yield BitVec(v, length)
