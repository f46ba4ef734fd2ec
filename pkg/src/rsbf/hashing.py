"""Seeded element hashing and double-hashed bit positions.

Every element is hashed once with XXH3-128.  The 16 digest bytes are read
as two little-endian 64-bit words ``a`` and ``b``; ``b`` is forced odd so
that the stride ``a + i*b (mod s)`` never degenerates for even ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import xxhash

HASH_FAMILY = "xxh3_128/double-hashing"

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class ElementDigest:
    a: int
    b: int


def digest(element: bytes, seed: int = 0) -> ElementDigest:
    """Hash ``element`` under a 64-bit ``seed``."""
    raw = xxhash.xxh3_128_digest(element, seed & _U64)
    a = int.from_bytes(raw[:8], "little")
    b = int.from_bytes(raw[8:], "little") | 1
    return ElementDigest(a, b)


def positions(d: ElementDigest, k: int, s: int) -> list[int]:
    """Return ``[(a + i*b) mod s for i in range(k)]``."""
    if k < 1 or s < 1:
        raise ValueError("k and s must be positive")
    return [(d.a + i * d.b) % s for i in range(k)]


def digest_many(elements: Iterable[bytes], seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`digest`; returns ``(a, b)`` as uint64 arrays."""
    f = xxhash.xxh3_128_digest
    seed &= _U64
    raw = b"".join([f(e, seed) for e in elements])
    words = np.frombuffer(raw, dtype="<u8").reshape(-1, 2)
    a = words[:, 0].astype(np.uint64)
    b = words[:, 1] | np.uint64(1)
    return a, b


def digest_records(records: np.ndarray, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Digest fixed-width 8-byte little-endian records given as a uint64 array."""
    buf = np.ascontiguousarray(records, dtype="<u8").tobytes()
    return digest_many((buf[i : i + 8] for i in range(0, len(buf), 8)), seed)


def digest_stream(stream: np.ndarray | Sequence[bytes], seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(stream, np.ndarray):
        return digest_records(stream, seed)
    return digest_many(stream, seed)


def positions_many(a: np.ndarray, b: np.ndarray, k: int, s: int) -> np.ndarray:
    """Positions for a batch of digests, shape ``(n, k)``.

    Works on residues so nothing overflows 64 bits.
    """
    su = np.uint64(s)
    p = a % su
    step = b % su
    out = np.empty((a.shape[0], k), dtype=np.int64)
    for i in range(k):
        out[:, i] = p
        p = (p + step) % su
    return out
