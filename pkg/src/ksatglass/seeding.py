"""Seed handling shared by every sampler.

Seeds may be given as non-negative integers or arbitrary strings. Strings of
decimal digits map to the same integer, so ``7`` and ``"7"`` name the same
stream; any other string is hashed.
"""
from __future__ import annotations

import hashlib
from typing import Union

import numpy as np

SeedLike = Union[int, str]


def seed_entropy(seed: SeedLike) -> int:
    if isinstance(seed, (bool, np.bool_)):
        raise TypeError("seed must be an int or str")
    if isinstance(seed, (int, np.integer)):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        return int(seed)
    if isinstance(seed, str):
        if seed.isdigit():
            return int(seed)
        return int.from_bytes(hashlib.sha256(seed.encode("utf-8")).digest()[:16], "little")
    raise TypeError(f"seed must be an int or str, got {type(seed).__name__}")


def seed_sequence(seed: SeedLike, *path: int) -> np.random.SeedSequence:
    """Counter-based child sequence: ``path`` is the spawn key under ``seed``."""
    return np.random.SeedSequence(seed_entropy(seed), spawn_key=tuple(int(p) for p in path))


def rng(seed: SeedLike, *path: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *path)))


def child_seed(seed: SeedLike, index: int, stream: int = 0) -> str:
    """Derive the seed of sample ``index`` on ``stream`` from a master seed.

    The result is a decimal string so that it round-trips through JSON and
    regenerates the same draw when passed back to a sampler. Distinct streams
    give independent families of per-sample seeds under one master seed.
    """
    state = seed_sequence(seed, 0xC0FFEE, stream, index).generate_state(2, dtype=np.uint64)
    return str((int(state[0]) << 64) | int(state[1]))
