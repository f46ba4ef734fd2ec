"""Reservoir-sampling Bloom filter.

``k`` bit arrays of ``s`` bits each.  The first ``s`` elements of a stream are
always inserted.  Element ``i > s`` is inserted with probability ``s/i``; an
insertion sets one bit per filter and resets one uniformly chosen position
per filter, which keeps the ones count near ``s/2``.  Once ``s/i`` drops
below ``p_star``, every element whose probe says DISTINCT is force-inserted
by swapping a random set bit for the element's own bit, so late arrivals
still get remembered without the filter filling up.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from . import hashing, seeding, theory

DEFAULT_P_STAR = 0.03


class Verdict(enum.Enum):
    DISTINCT = "distinct"
    DUPLICATE = "duplicate"


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    inserted: bool = False

    @property
    def duplicate(self) -> bool:
        return self.verdict is Verdict.DUPLICATE


@dataclass(frozen=True)
class FilterPlan:
    memory_bits: int
    num_filters: int
    filter_bits: int
    fpr_threshold: float
    p_star: float
    k_raw: float

    def __post_init__(self) -> None:
        if self.num_filters < 1 or self.filter_bits < 1:
            raise ValueError("num_filters and filter_bits must be positive")
        if self.num_filters * self.filter_bits > self.memory_bits:
            raise ValueError("plan exceeds the memory budget")
        if not 0.0 < self.p_star < 1.0:
            raise ValueError("p_star must be in (0, 1)")
        if not 0.0 < self.fpr_threshold < 1.0:
            raise ValueError("fpr_threshold must be in (0, 1)")

    @property
    def low_fnr_k(self) -> int:
        return 1

    @property
    def low_fpr_k(self) -> int:
        return max(1, math.floor(self.k_raw + 0.5))


PLAN_MODES = ("balanced", "low-fnr", "low-fpr")


def plan(
    memory_bits: int,
    fpr_threshold: float,
    p_star: float = DEFAULT_P_STAR,
    *,
    mode: str = "balanced",
    num_filters: int | None = None,
) -> FilterPlan:
    """Split ``memory_bits`` into ``k`` filters of ``s = M // k`` bits.

    ``mode`` picks ``k``: ``"balanced"`` uses the half-up rounded mean of 1
    and the raw count that meets ``fpr_threshold`` after warm-up,
    ``"low-fnr"`` fixes ``k = 1`` and ``"low-fpr"`` rounds the raw count.
    ``num_filters`` overrides all of them.
    """
    if memory_bits < 2:
        raise ValueError("memory_bits must be >= 2")
    if not 0.0 < fpr_threshold < 1.0:
        raise ValueError("fpr_threshold must be in (0, 1)")
    k_raw = theory.plan_k_raw(fpr_threshold)
    if num_filters is not None:
        k = int(num_filters)
        if k < 1:
            raise ValueError("num_filters must be >= 1")
    else:
        if fpr_threshold >= theory.ONE_MINUS_INV_E:
            raise ValueError(
                f"fpr_threshold {fpr_threshold} >= 1 - 1/e gives fewer than one filter; "
                "pass num_filters explicitly"
            )
        if mode == "balanced":
            k = theory.plan_k(k_raw)
        elif mode == "low-fnr":
            k = 1
        elif mode == "low-fpr":
            k = max(1, math.floor(k_raw + 0.5))
        else:
            raise ValueError(f"unknown plan mode {mode!r}")
    if memory_bits < 2 * k:
        raise ValueError(f"memory_bits={memory_bits} leaves fewer than 2 bits per filter for k={k}")
    return FilterPlan(memory_bits, k, memory_bits // k, fpr_threshold, p_star, k_raw)


# --------------------------------------------------------------------------
# kernel


@numba.njit(cache=True)
def _pick_set_bit(row, ones, rng):
    s = row.shape[0]
    if ones * 8 >= s:
        while True:
            r = rng.integers(0, s)
            if row[r]:
                return r
    target = rng.integers(0, ones)
    seen = 0
    for r in range(s):
        if row[r]:
            if seen == target:
                return r
            seen += 1
    return -1


@numba.njit(cache=True)
def _rsbf_kernel(bits, ones, seen, p_star, a, b, res_rng, del_rng, dup_out, ins_out, trace):
    k, s = bits.shape
    su = np.uint64(s)
    hp = np.empty(k, np.int64)
    tracing = trace.shape[0] > 0
    i = seen
    for n in range(a.shape[0]):
        i += 1
        p = a[n] % su
        step = b[n] % su
        dup = True
        for j in range(k):
            hp[j] = np.int64(p)
            if bits[j, hp[j]] == 0:
                dup = False
            p = (p + step) % su
        dup_out[n] = dup

        p_i = s / i
        take = i <= s
        if not take:
            take = res_rng.random() <= p_i
        inserted = False
        if take:
            for j in range(k):
                h = hp[j]
                if i > s:
                    r = del_rng.integers(0, s)
                    if r != h and bits[j, r]:
                        bits[j, r] = 0
                        ones[j] -= 1
                if bits[j, h] == 0:
                    bits[j, h] = 1
                    ones[j] += 1
            inserted = True
        elif p_i < p_star and not dup:
            for j in range(k):
                h = hp[j]
                if bits[j, h] == 0:
                    if ones[j] > 0:
                        r = _pick_set_bit(bits[j], ones[j], del_rng)
                        bits[j, r] = 0
                    else:
                        ones[j] += 1
                    bits[j, h] = 1
            inserted = True
        ins_out[n] = inserted
        if tracing:
            for j in range(k):
                trace[n, j] = ones[j]
    return i


_NO_TRACE = np.empty((0, 0), dtype=np.int64)


# --------------------------------------------------------------------------
# filter bank

_MAGIC = b"RSBF"
_VERSION = 1
_HEADER = struct.Struct("<4sHHIQQdQ")
_RNG = struct.Struct("<QQQQII")
_MASK64 = (1 << 64) - 1


def _pack_rng(gen: np.random.Generator) -> bytes:
    st = gen.bit_generator.state
    if st["bit_generator"] != "PCG64":
        raise TypeError("only PCG64 generators can be snapshotted")
    state, inc = st["state"]["state"], st["state"]["inc"]
    return _RNG.pack(
        state & _MASK64, state >> 64, inc & _MASK64, inc >> 64, st["has_uint32"], st["uinteger"]
    )


def _unpack_rng(raw: bytes) -> np.random.Generator:
    s_lo, s_hi, i_lo, i_hi, has32, uint = _RNG.unpack(raw)
    bg = np.random.PCG64()
    bg.state = {
        "bit_generator": "PCG64",
        "state": {"state": s_lo | (s_hi << 64), "inc": i_lo | (i_hi << 64)},
        "has_uint32": has32,
        "uinteger": uint,
    }
    return np.random.Generator(bg)


class FilterBank:
    """RSBF state: ``k`` filters, their ones counts, and the stream index.

    Not thread safe; :meth:`process` needs exclusive access.
    """

    def __init__(
        self,
        num_filters: int,
        filter_bits: int,
        p_star: float = DEFAULT_P_STAR,
        seed: int = 0,
    ) -> None:
        if num_filters < 1 or filter_bits < 1:
            raise ValueError("num_filters and filter_bits must be positive")
        if not 0.0 < p_star < 1.0:
            raise ValueError("p_star must be in (0, 1)")
        self.p_star = float(p_star)
        self.bits = np.zeros((num_filters, filter_bits), dtype=np.uint8)
        self.ones = np.zeros(num_filters, dtype=np.int64)
        self.elements_seen = 0
        self.hash_seed = seeding.hash_seed(seed)
        self.reservoir_rng = seeding.generator(seed, "reservoir")
        self.deletion_rng = seeding.generator(seed, "deletion")

    @classmethod
    def from_plan(cls, p: FilterPlan, seed: int = 0) -> FilterBank:
        return cls(p.num_filters, p.filter_bits, p.p_star, seed)

    @property
    def k(self) -> int:
        return self.bits.shape[0]

    @property
    def s(self) -> int:
        return self.bits.shape[1]

    def positions(self, element: bytes) -> list[int]:
        return hashing.positions(hashing.digest(element, self.hash_seed), self.k, self.s)

    def probe(self, element: bytes) -> Decision:
        """Report whether all ``k`` bits of ``element`` are set.  No mutation."""
        hit = all(self.bits[j, h] for j, h in enumerate(self.positions(element)))
        return Decision(Verdict.DUPLICATE if hit else Verdict.DISTINCT)

    def process(self, element: bytes) -> Decision:
        """Probe, then run one insertion step for ``element``."""
        d = hashing.digest(element, self.hash_seed)
        a = np.array([d.a], dtype=np.uint64)
        b = np.array([d.b], dtype=np.uint64)
        dup, ins = self.process_digests(a, b)
        return Decision(Verdict.DUPLICATE if dup[0] else Verdict.DISTINCT, bool(ins[0]))

    def process_digests(
        self, a: np.ndarray, b: np.ndarray, trace: np.ndarray | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Process a batch of pre-hashed elements in stream order.

        Returns boolean arrays ``(duplicate, inserted)``.  If ``trace`` is an
        ``(n, k)`` int64 array it receives the ones counts after each element.
        """
        n = a.shape[0]
        dup = np.empty(n, dtype=np.bool_)
        ins = np.empty(n, dtype=np.bool_)
        if trace is None:
            trace = _NO_TRACE
        elif trace.shape != (n, self.k):
            raise ValueError("trace must have shape (n, k)")
        self.elements_seen = int(
            _rsbf_kernel(
                self.bits,
                self.ones,
                self.elements_seen,
                self.p_star,
                np.ascontiguousarray(a, dtype=np.uint64),
                np.ascontiguousarray(b, dtype=np.uint64),
                self.reservoir_rng,
                self.deletion_rng,
                dup,
                ins,
                trace,
            )
        )
        return dup, ins

    def process_many(self, elements: Sequence[bytes] | np.ndarray) -> list[Decision]:
        a, b = hashing.digest_stream(elements, self.hash_seed)
        dup, ins = self.process_digests(a, b)
        return [
            Decision(Verdict.DUPLICATE if d else Verdict.DISTINCT, bool(x)) for d, x in zip(dup, ins)
        ]

    def ones_fraction(self) -> float:
        return float(self.ones.mean()) / self.s

    def ones_total(self) -> int:
        return int(self.ones.sum())

    def recount(self) -> np.ndarray:
        return self.bits.sum(axis=1, dtype=np.int64)

    # -- persistence -------------------------------------------------------

    def snapshot(self) -> bytes:
        header = _HEADER.pack(
            _MAGIC, _VERSION, 0, self.k, self.s, self.elements_seen, self.p_star, self.hash_seed
        )
        words = -(-self.s // 64)
        packed = np.packbits(self.bits, axis=1, bitorder="little")
        body = np.zeros((self.k, words * 8), dtype=np.uint8)
        body[:, : packed.shape[1]] = packed
        return b"".join(
            [header, _pack_rng(self.reservoir_rng), _pack_rng(self.deletion_rng), body.tobytes()]
        )

    @classmethod
    def restore(cls, raw: bytes) -> FilterBank:
        if len(raw) < _HEADER.size + 2 * _RNG.size:
            raise ValueError("snapshot truncated")
        magic, version, _, k, s, seen, p_star, hseed = _HEADER.unpack_from(raw)
        if magic != _MAGIC:
            raise ValueError("not an RSBF snapshot")
        if version != _VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        if k < 1 or s < 1:
            raise ValueError("corrupt snapshot dimensions")
        off = _HEADER.size
        res = _unpack_rng(raw[off : off + _RNG.size])
        off += _RNG.size
        dele = _unpack_rng(raw[off : off + _RNG.size])
        off += _RNG.size
        words = -(-s // 64)
        if len(raw) - off != k * words * 8:
            raise ValueError("snapshot body has the wrong length")
        body = np.frombuffer(raw, dtype=np.uint8, offset=off).reshape(k, words * 8)
        bank = cls.__new__(cls)
        bank.p_star = p_star
        bank.bits = np.ascontiguousarray(
            np.unpackbits(body, axis=1, count=s, bitorder="little"), dtype=np.uint8
        )
        bank.ones = bank.recount()
        bank.elements_seen = seen
        bank.hash_seed = hseed
        bank.reservoir_rng = res
        bank.deletion_rng = dele
        return bank
