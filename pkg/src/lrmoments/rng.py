"""Seeded random streams.

All randomness goes through numpy's PCG64.  Independent sub-streams (one
per Monte Carlo replication, say) are keyed by a SplitMix64 finalizer of
``(seed, index)`` so serial and parallel runs draw identical numbers.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """SplitMix64 output function (Steele, Lea and Flood constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def substream_seed(seed: int, index: int) -> int:
    return splitmix64((splitmix64(seed & _MASK) ^ (index & _MASK)) & _MASK)


def generator(seed: int | None = 0, index: int | None = None) -> np.random.Generator:
    if seed is None:
        seed = 0
    if index is not None:
        seed = substream_seed(int(seed), int(index))
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK))
