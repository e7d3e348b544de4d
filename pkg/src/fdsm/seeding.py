"""Deterministic RNG plumbing: one master seed, named independent streams."""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(token: str) -> int:
    """64-bit FNV-1a hash of a UTF-8 string."""
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def substream(master_seed: int, name: str, *indices: int) -> np.random.Generator:
    """A generator for the named stream, independent of sibling streams.

    The same (master_seed, name, indices) triple always yields the same
    stream, and consuming one stream never shifts any other.
    """
    entropy = [int(master_seed) & _MASK64, fnv1a64(name), *[int(i) & _MASK64 for i in indices]]
    return np.random.default_rng(np.random.SeedSequence(entropy))
