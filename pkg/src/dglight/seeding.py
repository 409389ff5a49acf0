"""Stable seed derivation.

Builtin hash() is salted per process, so string keys go through crc32 to keep
derived streams reproducible across runs and platforms.
"""

from __future__ import annotations

import zlib

import numpy as np


def seed_parts(*parts) -> list[int]:
    seq = []
    for p in parts:
        if isinstance(p, (bool,)):
            raise TypeError("bool is not a seed part")
        if isinstance(p, (int, np.integer)):
            seq.append(int(p) & 0xFFFFFFFF)
        elif isinstance(p, str):
            seq.append(zlib.crc32(p.encode("utf-8")))
        else:
            raise TypeError(f"cannot derive a seed from {type(p).__name__}")
    return seq


def rng_from(*parts) -> np.random.Generator:
    """Generator keyed by a tuple of ints and strings."""
    return np.random.default_rng(seed_parts(*parts))
