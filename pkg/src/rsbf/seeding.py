"""Named random sub-streams derived from one master seed.

Each consumer (hashing, reservoir draws, deletions, the stream generator,
SBF decrements) gets its own PCG64 stream, so changing how often one
component draws never shifts the numbers another component sees.
"""

from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("hashing", "reservoir", "deletion", "generator", "sbf")


def _seed_sequence(seed: int, name: str) -> np.random.SeedSequence:
    if name not in STREAMS:
        raise KeyError(f"unknown random stream {name!r}")
    return np.random.SeedSequence([seed & ((1 << 64) - 1), zlib.crc32(name.encode())])


def generator(seed: int, name: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_seed_sequence(seed, name)))


def hash_seed(seed: int) -> int:
    """64-bit seed for the element hash."""
    return int(_seed_sequence(seed, "hashing").generate_state(1, np.uint64)[0])
