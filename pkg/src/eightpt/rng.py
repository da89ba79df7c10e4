"""Seed splitting.

Every random stream is derived from a master seed plus a tuple of purpose
tags (strings or integers) through a 64-bit mix, so adding a new consumer
never perturbs existing streams and per-instance streams are independent of
generation order.
"""
import hashlib

import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _tag_value(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & _MASK
    digest = hashlib.blake2b(str(tag).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, *tags) -> int:
    """64-bit seed for the stream identified by ``tags`` under ``seed``."""
    h = _splitmix64(int(seed) & _MASK)
    for tag in tags:
        h = _splitmix64(h ^ _tag_value(tag))
    return h


def derive_rng(seed: int, *tags) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *tags))
