"""Random parity-check families used for X-basis hashing.

``uniform``   every m x N matrix equally likely (independent uniform rows)
``rank``      uniform over matrices of rank m (what CNOT(II) can realize)
``toeplitz``  m x N Toeplitz matrices, 2^(m+N-1) of them; for every z != 0,
              ``T z`` is uniform on F_2^m, so each inclusion event has
              probability exactly 2^-m
"""

from __future__ import annotations

import numpy as np

from .rng import as_generator

FAMILIES = ("uniform", "rank", "toeplitz")
MAX_EXHAUSTIVE_FAMILY = 1 << 16


def _parity(a: np.ndarray) -> np.ndarray:
    return (np.bitwise_count(a) & 1).astype(np.uint8)


def toeplitz_rows(diagonals: np.ndarray, m: int, N: int) -> np.ndarray:
    """Rows (packed, MSB = column 0) of Toeplitz matrices from packed diagonal words.

    ``diagonals`` holds integers of ``m + N - 1`` bits; row ``i`` is the
    window of ``N`` bits starting at bit ``i``.
    """
    d = np.asarray(diagonals, dtype=np.uint64)[..., None]
    shifts = np.arange(m, dtype=np.uint64)
    return (d >> shifts) & np.uint64((1 << N) - 1)


def _rank_batch(rows: np.ndarray, N: int) -> np.ndarray:
    """GF(2) rank of each matrix in a (batch, m) array of packed rows."""
    work = rows.copy()
    batch, m = work.shape
    ranks = np.zeros(batch, dtype=int)
    for col in range(N):
        bit = np.uint64(1 << (N - 1 - col))
        has = (work & bit) != 0
        # only rows not yet used as pivots are eligible
        eligible = has & (np.arange(m)[None, :] >= ranks[:, None])
        found = eligible.any(axis=1)
        pivot = np.argmax(eligible, axis=1)
        b = np.nonzero(found)[0]
        if b.size == 0:
            continue
        prow = work[b, pivot[b]]
        # swap pivot row into position ranks[b]
        target = ranks[b]
        work[b, pivot[b]] = work[b, target]
        work[b, target] = prow
        clear = (work[b] & bit) != 0
        clear[np.arange(b.size), target] = False
        work[b] ^= np.where(clear, prow[:, None], np.uint64(0))
        ranks[b] += 1
    return ranks


def sample_rows(family: str, m: int, N: int, count: int, seed=None) -> np.ndarray:
    """``count`` random hash matrices as a (count, m) array of packed rows."""
    if N > 62:
        raise ValueError("packed sampling supports N <= 62")
    rng = as_generator(seed)
    if family == "uniform":
        return rng.integers(0, 1 << N, size=(count, m), dtype=np.uint64)
    if family == "toeplitz":
        diag = rng.integers(0, 1 << (m + N - 1), size=count, dtype=np.uint64) if m else np.zeros(count, np.uint64)
        return toeplitz_rows(diag, m, N)
    if family == "rank":
        out = np.empty((count, m), dtype=np.uint64)
        filled = 0
        while filled < count:
            batch = rng.integers(0, 1 << N, size=(2 * (count - filled) + 8, m), dtype=np.uint64)
            ok = batch[_rank_batch(batch, N) == m]
            take = min(len(ok), count - filled)
            out[filled : filled + take] = ok[:take]
            filled += take
        return out
    raise ValueError(f"unknown hash family {family!r}; choose from {FAMILIES}")


def all_toeplitz_rows(m: int, N: int) -> np.ndarray:
    size = 1 << (m + N - 1) if m else 1
    if size > MAX_EXHAUSTIVE_FAMILY:
        raise ValueError(f"Toeplitz family of size 2^{m + N - 1} exceeds the exhaustive cap 2^16")
    return toeplitz_rows(np.arange(size, dtype=np.uint64), m, N)


def survives(rows: np.ndarray, z: int) -> np.ndarray:
    """True where every parity row annihilates the difference vector ``z``."""
    if rows.shape[-1] == 0:
        return np.ones(rows.shape[:-1], dtype=bool)
    return ~(_parity(rows & np.uint64(z)).astype(bool)).any(axis=-1)


def survival_probability(family: str, m: int, N: int) -> float:
    """Exact probability that a fixed nonzero difference survives ``m`` checks."""
    if family in ("uniform", "toeplitz"):
        return 2.0**-m
    if family == "rank":
        # kernel is a uniform (N-m)-dimensional subspace
        return (2.0 ** (N - m) - 1) / (2.0**N - 1)
    raise ValueError(f"unknown hash family {family!r}")


def collision_stats(N: int, m: int, trials: int, seed=None, family: str = "uniform", z: int | None = None) -> dict:
    """Empirical survival frequency of a fixed ``y != x`` under ``m`` random parity checks."""
    rng = as_generator(seed)
    if z is None:
        z = int(rng.integers(1, 1 << N))
    if not 0 < z < (1 << N):
        raise ValueError("difference vector must be nonzero")
    rows = sample_rows(family, m, N, trials, rng)
    hits = survives(rows, z)
    freq = float(hits.mean())
    p = survival_probability(family, m, N)
    sigma = float(np.sqrt(p * (1 - p) / trials))
    return {
        "family": family,
        "N": N,
        "m": m,
        "trials": trials,
        "difference": format(z, f"0{N}b"),
        "frequency": freq,
        "expected": p,
        "nominal": 2.0**-m,
        "sigma": sigma,
        "z_score": (freq - p) / sigma if sigma > 0 else 0.0,
    }
