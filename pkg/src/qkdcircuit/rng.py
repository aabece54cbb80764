"""Seeded randomness: one counter-based generator (Philox), split into streams."""

from __future__ import annotations

import numpy as np


def as_generator(seed=None) -> np.random.Generator:
    """Return a Philox-backed generator; generators are passed through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def split(seed, count: int) -> list[np.random.Generator]:
    """Independent child streams for ``count`` parallel tasks.

    Children depend only on ``seed`` and their index, so per-task results do
    not change with scheduling.
    """
    if isinstance(seed, np.random.Generator):
        seq = seed.bit_generator.seed_seq.spawn(count)
    else:
        seq = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(s)) for s in seq]
