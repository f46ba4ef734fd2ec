"""Stream generation, ingestion, exact ground truth and windowed metrics."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterator, Protocol, Sequence

import numpy as np

from . import hashing, seeding

RECORD_BYTES = 8
ENCODING = "u64le"


class StreamFormatError(ValueError):
    """Input file does not match the requested stream format."""


@dataclass(frozen=True)
class StreamSpec:
    """Synthetic stream: ``length`` uniform draws from ``{0..universe_size-1}``.

    ``universe_size=None`` draws without replacement, so every element is
    distinct.
    """

    length: int
    universe_size: int | None
    seed: int = 0
    encoding: str = ENCODING

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if self.universe_size is not None and self.universe_size < 1:
            raise ValueError("universe_size must be >= 1")
        if self.encoding != ENCODING:
            raise ValueError(f"unsupported encoding {self.encoding!r}")


def expected_distinct_fraction(length: int, universe: int) -> float:
    """Expected fraction of distinct values among ``length`` uniform draws."""
    if universe == 1:
        return 1.0 / length
    return universe / length * -math.expm1(length * math.log1p(-1.0 / universe))


def solve_universe(length: int, distinct_fraction: float) -> int | None:
    """Smallest universe whose expected distinct fraction reaches the target.

    Returns ``None`` for a target of 1 (draw without replacement).
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if not 0.0 < distinct_fraction <= 1.0:
        raise ValueError("distinct_fraction must be in (0, 1]")
    if distinct_fraction == 1.0:
        return None
    if expected_distinct_fraction(length, 1) >= distinct_fraction:
        return 1
    lo, hi = 1, 2
    while expected_distinct_fraction(length, hi) < distinct_fraction:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if expected_distinct_fraction(length, mid) >= distinct_fraction:
            hi = mid
        else:
            lo = mid
    return hi


def generate(spec: StreamSpec) -> np.ndarray:
    """Deterministic stream of ``spec.length`` uint64 values."""
    rng = seeding.generator(spec.seed, "generator")
    if spec.universe_size is None:
        return rng.permutation(spec.length).astype(np.uint64)
    return rng.integers(0, spec.universe_size, size=spec.length, dtype=np.uint64)


def to_bytes(records: np.ndarray) -> bytes:
    return np.ascontiguousarray(records, dtype="<u8").tobytes()


def iter_elements(stream: np.ndarray | Sequence[bytes]) -> Iterator[bytes]:
    if isinstance(stream, np.ndarray):
        buf = to_bytes(stream)
        for i in range(0, len(buf), RECORD_BYTES):
            yield buf[i : i + RECORD_BYTES]
    else:
        yield from stream


def ingest(path: str | os.PathLike, mode: str = "lines") -> np.ndarray | list[bytes]:
    """Read a stream from disk.

    ``lines``: one element per newline-terminated line (a trailing ``\\r`` is
    dropped).  ``binary``: consecutive 8-byte little-endian records, returned
    as a uint64 array.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if mode == "binary":
        if len(data) % RECORD_BYTES:
            raise StreamFormatError(f"{path}: {len(data)} bytes is not a whole number of 8-byte records")
        return np.frombuffer(data, dtype="<u8").astype(np.uint64)
    if mode != "lines":
        raise ValueError(f"unknown ingest mode {mode!r}")
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    return [ln[:-1] if ln.endswith(b"\r") else ln for ln in lines]


def duplicate_labels(stream: np.ndarray | Sequence[bytes]) -> np.ndarray:
    """Exact ground truth: ``True`` where the element occurred earlier."""
    if isinstance(stream, np.ndarray):
        n = stream.shape[0]
        labels = np.ones(n, dtype=np.bool_)
        if n:
            _, first = np.unique(stream, return_index=True)
            labels[first] = False
        return labels
    seen: set[bytes] = set()
    labels = np.empty(len(stream), dtype=np.bool_)
    for i, e in enumerate(stream):
        labels[i] = e in seen
        seen.add(e)
    return labels


class StreamFilter(Protocol):
    hash_seed: int

    def process_digests(self, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...

    def ones_total(self) -> int: ...


@dataclass(frozen=True)
class MetricsWindow:
    end_index: int
    window_fp: int
    window_fn: int
    window_true_distinct: int
    window_true_duplicate: int
    cum_fpr: float
    cum_fnr: float
    ones_total: int
    ones_delta: int
    summary: bool = False

    FIELDS = (
        "end_index",
        "window_fp",
        "window_fn",
        "window_true_distinct",
        "window_true_duplicate",
        "cum_fpr",
        "cum_fnr",
        "ones_total",
        "ones_delta",
        "summary",
    )

    def row(self) -> list[str]:
        return [
            str(self.end_index),
            str(self.window_fp),
            str(self.window_fn),
            str(self.window_true_distinct),
            str(self.window_true_duplicate),
            repr(self.cum_fpr),
            repr(self.cum_fnr),
            str(self.ones_total),
            str(self.ones_delta),
            "1" if self.summary else "0",
        ]


def _rate(num: int, den: int) -> float:
    return num / den if den else 0.0


def evaluate(
    filt: StreamFilter,
    stream: np.ndarray | Sequence[bytes],
    window_size: int = 1000,
    labels: np.ndarray | None = None,
    digests: tuple[np.ndarray, np.ndarray] | None = None,
) -> list[MetricsWindow]:
    """Run ``stream`` through ``filt`` next to the exact oracle.

    Emits one :class:`MetricsWindow` per ``window_size`` records and a final
    summary row whose counts cover the whole stream and whose ``ones_delta``
    is the net change over the run.  ``labels`` and ``digests`` (hashed with
    ``filt.hash_seed``) may be passed in to share them between runs.
    """
    if window_size < 1:
        raise ValueError("window_size must be >= 1")
    if labels is None:
        labels = duplicate_labels(stream)
    a, b = digests if digests is not None else hashing.digest_stream(stream, filt.hash_seed)
    n = a.shape[0]
    if labels.shape[0] != n:
        raise ValueError("labels do not match the stream length")

    out: list[MetricsWindow] = []
    start_ones = prev_ones = filt.ones_total()
    fp = fn = n_dist = n_dup = 0
    for lo in range(0, n, window_size):
        hi = min(lo + window_size, n)
        verdict, _ = filt.process_digests(a[lo:hi], b[lo:hi])
        truth = labels[lo:hi]
        w_dup = int(truth.sum())
        w_dist = (hi - lo) - w_dup
        w_fp = int(np.count_nonzero(verdict & ~truth))
        w_fn = int(np.count_nonzero(~verdict & truth))
        fp += w_fp
        fn += w_fn
        n_dist += w_dist
        n_dup += w_dup
        ones = filt.ones_total()
        out.append(
            MetricsWindow(
                hi, w_fp, w_fn, w_dist, w_dup,
                _rate(fp, n_dist), _rate(fn, n_dup), ones, ones - prev_ones,
            )
        )
        prev_ones = ones
    out.append(
        MetricsWindow(
            n, fp, fn, n_dist, n_dup,
            _rate(fp, n_dist), _rate(fn, n_dup), prev_ones, prev_ones - start_ones, summary=True,
        )
    )
    return out


def stabilization_index(windows: Sequence[MetricsWindow], threshold: float) -> int | None:
    """End index of the first window after which every ``|ones_delta|`` stays
    below ``threshold``; ``None`` if the final window still exceeds it."""
    rows = [w for w in windows if not w.summary]
    last_bad = -1
    for idx, w in enumerate(rows):
        if abs(w.ones_delta) >= threshold:
            last_bad = idx
    if last_bad == len(rows) - 1:
        return None
    return rows[last_bad + 1].end_index
