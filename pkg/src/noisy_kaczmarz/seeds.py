"""Deterministic stream splitting.

Every random stream in the package is a PCG64 generator keyed by a base seed
and a tuple of non-negative integers.  The key is hashed by numpy's
``SeedSequence`` (``entropy=seed, spawn_key=keys``), so the stream for, say,
measurement ``j`` of trial ``t`` can be rebuilt in isolation without drawing
any of the other streams first.
"""
from __future__ import annotations

import numpy as np


def seed_sequence(seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))


def generator(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))


def sub_seed(seed: int, *keys: int) -> int:
    """A 64-bit integer seed derived from ``(seed, *keys)``."""
    return int(seed_sequence(seed, *keys).generate_state(1, np.uint64)[0])
