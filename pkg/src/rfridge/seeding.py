"""Counter-based seed derivation.

Every random stream in the package is keyed by ``(master_seed, *counters)``
through :class:`numpy.random.SeedSequence` spawn keys, so a stream never
depends on how many draws were taken from any other stream.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & _MASK64


def seed_sequence(seed: int, *counters) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(_key(c) for c in counters))


def rng_for(seed: int, *counters) -> np.random.Generator:
    """Independent Philox generator for the stream ``(seed, *counters)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *counters)))


def derive_seed(seed: int, *counters) -> int:
    """A 64-bit child seed, stable under reordering of sibling computations."""
    return int(seed_sequence(seed, *counters).generate_state(1, np.uint64)[0])
