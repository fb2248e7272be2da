"""Reproducible random streams.

Every stream is a counter-based Philox generator keyed by a SeedSequence
built from ``(seed, experiment, replica, purpose)``::

    SeedSequence(entropy=seed, spawn_key=(crc32(experiment), replica, crc32(purpose)))

Streams for different (experiment, replica, purpose) triples are therefore
statistically independent, and any single replica can be regenerated
without replaying the others.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def stream_key(seed: int, experiment: str = "", replica: int = 0, purpose: str = "") -> np.random.SeedSequence:
    if seed < 0 or replica < 0:
        raise ValueError("seed and replica must be nonnegative")
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(_tag(experiment), int(replica), _tag(purpose)))


def make_rng(seed: int | np.random.Generator | None, experiment: str = "", replica: int = 0,
             purpose: str = "") -> np.random.Generator:
    """Generator for one (experiment, replica, purpose) stream; Generators pass through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("a seed is required")
    return np.random.Generator(np.random.Philox(stream_key(seed, experiment, replica, purpose)))


def derive_seed(seed: int, experiment: str, replica: int) -> int:
    """63-bit integer seed for one replica, stored on records so it replays alone."""
    state = stream_key(seed, experiment, replica, "seed").generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & ((1 << 63) - 1)
