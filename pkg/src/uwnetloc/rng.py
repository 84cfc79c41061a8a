"""Seeded random sub-streams.

Every random draw in the package comes from a generator keyed by
``(seed, purpose, *index)``. Adding a new purpose or index never shifts the
draws of an existing one.
"""

import zlib

import numpy as np


def purpose_code(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, purpose: str, *index: int) -> np.random.Generator:
    """Independent generator for ``purpose`` at ``index`` under ``seed``."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, purpose_code(purpose), *(int(i) for i in index)]
    return np.random.default_rng(np.random.SeedSequence(key))
