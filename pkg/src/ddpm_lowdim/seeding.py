"""Deterministic 64-bit seed derivation.

Child seeds are ``mix(master, key)`` where ``mix`` is the SplitMix64
finalizer applied to ``master + (key + 1) * GOLDEN``. String keys are first
reduced with 64-bit FNV-1a, so a grid point's seed depends on what the grid
point *is*, not where it sits in the grid.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


def mix(master: int, key) -> int:
    """Child seed for ``key`` (an int index or a string label)."""
    if isinstance(key, str):
        key = fnv1a64(key)
    return splitmix64((int(master) & MASK64) + ((int(key) + 1) * GOLDEN))


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & MASK64)
