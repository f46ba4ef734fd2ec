"""Comparator filters with the same ``process`` interface as :class:`FilterBank`.

``ClassicBloom`` is the textbook insert-everything Bloom filter.  ``SbfBank``
is a stable Bloom filter rebuilt from its published outline: probe ``k``
``d``-bit cells, decrement ``P`` random cells, then set the probed cells to
``Max = 2**d - 1``.
"""

from __future__ import annotations

import math
from typing import Sequence

import numba
import numpy as np

from . import hashing, seeding
from .core import Decision, Verdict


@numba.njit(cache=True)
def _bloom_kernel(bits, k, a, b, dup_out):
    m = bits.shape[0]
    mu = np.uint64(m)
    added = 0
    for n in range(a.shape[0]):
        p = a[n] % mu
        step = b[n] % mu
        dup = True
        for _ in range(k):
            if bits[p] == 0:
                dup = False
                bits[p] = 1
                added += 1
            p = (p + step) % mu
        dup_out[n] = dup
    return added


@numba.njit(cache=True)
def _sbf_kernel(cells, stamp, clock, cell_max, k, decrements, a, b, rng, dup_out):
    m = cells.shape[0]
    mu = np.uint64(m)
    hp = np.empty(k, np.int64)
    delta = 0
    draws = min(decrements, m)
    for n in range(a.shape[0]):
        clock += 1
        p = a[n] % mu
        step = b[n] % mu
        dup = True
        for j in range(k):
            hp[j] = np.int64(p)
            if cells[hp[j]] == 0:
                dup = False
            p = (p + step) % mu
        dup_out[n] = dup
        # distinct cells: no cell loses more than one unit per step
        for _ in range(draws):
            r = rng.integers(0, m)
            while stamp[r] == clock:
                r = rng.integers(0, m)
            stamp[r] = clock
            if cells[r] > 0:
                cells[r] -= 1
                if cells[r] == 0:
                    delta -= 1
        for j in range(k):
            if cells[hp[j]] == 0:
                delta += 1
            cells[hp[j]] = cell_max
    return delta, clock


class ClassicBloom:
    """Bloom filter of ``m`` bits and ``k`` double-hashed probes."""

    def __init__(self, num_bits: int, num_hashes: int, seed: int = 0) -> None:
        if num_bits < 1 or num_hashes < 1:
            raise ValueError("num_bits and num_hashes must be positive")
        self.bits = np.zeros(num_bits, dtype=np.uint8)
        self.num_hashes = num_hashes
        self.inserted_count = 0
        self._ones = 0
        self.hash_seed = seeding.hash_seed(seed)

    @property
    def m(self) -> int:
        return self.bits.shape[0]

    def process_digests(self, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        dup = np.empty(a.shape[0], dtype=np.bool_)
        self._ones += int(_bloom_kernel(self.bits, self.num_hashes, a, b, dup))
        self.inserted_count += a.shape[0]
        return dup, np.ones(a.shape[0], dtype=np.bool_)

    def process(self, element: bytes) -> Decision:
        d = hashing.digest(element, self.hash_seed)
        dup, _ = self.process_digests(
            np.array([d.a], dtype=np.uint64), np.array([d.b], dtype=np.uint64)
        )
        return Decision(Verdict.DUPLICATE if dup[0] else Verdict.DISTINCT, True)

    def contains(self, element: bytes) -> bool:
        d = hashing.digest(element, self.hash_seed)
        return all(self.bits[p] for p in hashing.positions(d, self.num_hashes, self.m))

    def ones_total(self) -> int:
        return self._ones


def balanced_decrements(num_hashes: int, cell_bits: int) -> int:
    """Decrements per element that hold the nonzero-cell fraction near 1/2.

    A refreshed cell survives about ``Max * m / P`` steps and is refreshed
    every ``m / k`` steps, so the nonzero fraction is ``1 - exp(-k Max / P)``.
    """
    cell_max = (1 << cell_bits) - 1
    return max(1, round(num_hashes * cell_max / math.log(2.0)))


class SbfBank:
    """Stable Bloom filter over ``num_cells`` counters of ``cell_bits`` bits."""

    def __init__(
        self,
        num_cells: int,
        num_hashes: int,
        cell_bits: int = 3,
        decrements: int | None = None,
        seed: int = 0,
    ) -> None:
        if num_cells < 1 or num_hashes < 1:
            raise ValueError("num_cells and num_hashes must be positive")
        if not 1 <= cell_bits <= 8:
            raise ValueError("cell_bits must be in [1, 8]")
        self.cell_bits = cell_bits
        self.cell_max = (1 << cell_bits) - 1
        self.num_hashes = num_hashes
        self.decrements = balanced_decrements(num_hashes, cell_bits) if decrements is None else decrements
        if self.decrements < 0:
            raise ValueError("decrements must be >= 0")
        self.cells = np.zeros(num_cells, dtype=np.uint8)
        self._stamp = np.zeros(num_cells, dtype=np.int64)
        self._clock = 0
        self._nonzero = 0
        self.hash_seed = seeding.hash_seed(seed)
        self.rng = seeding.generator(seed, "sbf")

    @classmethod
    def with_memory(cls, memory_bits: int, num_hashes: int, cell_bits: int = 3, **kw) -> SbfBank:
        """Give the SBF the same bit budget: ``floor(M / d)`` cells."""
        return cls(memory_bits // cell_bits, num_hashes, cell_bits, **kw)

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    def process_digests(self, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        dup = np.empty(a.shape[0], dtype=np.bool_)
        delta, self._clock = _sbf_kernel(
            self.cells, self._stamp, self._clock, self.cell_max, self.num_hashes,
            self.decrements, a, b, self.rng, dup,
        )
        self._nonzero += int(delta)
        return dup, np.ones(a.shape[0], dtype=np.bool_)

    def process(self, element: bytes) -> Decision:
        d = hashing.digest(element, self.hash_seed)
        dup, _ = self.process_digests(
            np.array([d.a], dtype=np.uint64), np.array([d.b], dtype=np.uint64)
        )
        return Decision(Verdict.DUPLICATE if dup[0] else Verdict.DISTINCT, True)

    def process_many(self, elements: Sequence[bytes] | np.ndarray) -> list[Decision]:
        a, b = hashing.digest_stream(elements, self.hash_seed)
        dup, _ = self.process_digests(a, b)
        return [Decision(Verdict.DUPLICATE if d else Verdict.DISTINCT, True) for d in dup]

    def ones_total(self) -> int:
        """Number of nonzero cells."""
        return self._nonzero
