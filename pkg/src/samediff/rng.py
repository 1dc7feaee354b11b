"""Deterministic named random streams derived from one 64-bit seed.

Every stochastic choice in the toolkit (pair sampling, parameter init,
epoch shuffles, sweep cells) draws from its own stream so that changing one
consumer never perturbs the others.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["substream"]


def _key_int(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def substream(seed: int, *key) -> np.random.Generator:
    """Generator for the stream named by ``key`` under the given base seed."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_key_int(p) for p in key]
    return np.random.default_rng(np.random.SeedSequence(entropy))
