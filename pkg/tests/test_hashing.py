import itertools

import numpy as np
import pytest

from qkdcircuit import hashing
from qkdcircuit.gf2 import BitMatrix, rank


def unpack(rows: np.ndarray, N: int) -> BitMatrix:
    return BitMatrix(tuple(int(r) for r in rows), N)


def test_toeplitz_rows_are_toeplitz():
    m, N = 3, 5
    for D in range(1 << (m + N - 1)):
        M = unpack(hashing.toeplitz_rows(np.array([D]), m, N)[0], N).to_array()
        for i in range(1, m):
            np.testing.assert_array_equal(M[i, 1:], M[i - 1, :-1])


@pytest.mark.parametrize("m, N", [(1, 3), (2, 4), (3, 5), (4, 4)])
def test_toeplitz_family_is_universal(m, N):
    rows = hashing.all_toeplitz_rows(m, N)
    for z in range(1, 1 << N):
        assert hashing.survives(rows, z).mean() == pytest.approx(2.0**-m, abs=0)


def test_rank_batch_matches_scalar_rank():
    rng = np.random.default_rng(0)
    rows = rng.integers(0, 1 << 6, size=(500, 4), dtype=np.uint64)
    ranks = hashing._rank_batch(rows, 6)
    for r, k in zip(rows, ranks):
        assert rank(unpack(r, 6)) == k


def test_rank_family_full_rank():
    rows = hashing.sample_rows("rank", 3, 5, 300, seed=1)
    assert all(rank(unpack(r, 5)) == 3 for r in rows)


def test_survival_probability_rank_exact():
    # brute force over all rank-2 2x3 matrices
    m, N = 2, 3
    mats = [r for r in itertools.product(range(1 << N), repeat=m) if rank(BitMatrix(r, N)) == m]
    rows = np.array(mats, dtype=np.uint64)
    for z in range(1, 1 << N):
        assert hashing.survives(rows, z).mean() == pytest.approx(hashing.survival_probability("rank", m, N))


def test_uniform_collision_stats_within_3_sigma():
    st = hashing.collision_stats(10, 3, 100_000, seed=4)
    assert abs(st["z_score"]) < 3
    assert st["expected"] == st["nominal"] == 2.0**-3


def test_m_zero_always_survives():
    rows = hashing.sample_rows("uniform", 0, 5, 10, seed=0)
    assert hashing.survives(rows, 7).all()


def test_bad_inputs():
    with pytest.raises(ValueError):
        hashing.sample_rows("bogus", 1, 3, 2)
    with pytest.raises(ValueError):
        hashing.all_toeplitz_rows(8, 12)
    with pytest.raises(ValueError):
        hashing.collision_stats(4, 1, 10, z=0)
