"""Closed-form predictors for classic Bloom filters and RSBF.

All functions are pure.  Bounds that are only meaningful in an asymptotic
regime (for example the FPR bound, which needs ``m >> k*s``) are clamped
to ``[0, 1]`` and come back as a :class:`Bound` carrying a ``valid`` flag
instead of raising, so parameter sweeps never abort half way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

ONE_MINUS_INV_E = 1.0 - math.exp(-1.0)


@dataclass(frozen=True)
class Bound:
    value: float
    valid: bool
    raw: float

    def __float__(self) -> float:
        return self.value


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def classic_fpr(n: float, m: float, k: float) -> float:
    """False-positive rate ``(1 - exp(-k n / m))**k`` of a Bloom filter."""
    if m < 1 or k < 1 or n < 0:
        raise ValueError("need n >= 0, m >= 1, k >= 1")
    return _clamp((1.0 - math.exp(-k * n / m)) ** k)


def optimal_k(m: float, n: float) -> float:
    """Unrounded optimal hash count ``ln 2 * m / n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.log(2.0) * m / n


def _survive_log(m: float, universe: float) -> float:
    # log(((U-1)/U)**m); U == 1 means every later element repeats
    if universe <= 1:
        return -math.inf
    return m * math.log1p(-1.0 / universe)


def rsbf_fpr_bound(m: float, s: float, k: float, universe: float) -> Bound:
    """Probability that element ``m+1`` is reported as a false positive.

    ``((U-1)/U)**m * (1 - k s/m + ((1 - 1/e) s/m)**k)``.  The bracket is a
    first-order expansion and only holds for ``m >> k*s``; outside that
    regime the result is clamped and flagged invalid.
    """
    if not (m >= s >= 1 and k >= 1 and universe >= 2):
        raise ValueError("need m >= s >= 1, k >= 1, U >= 2")
    unique = math.exp(_survive_log(m, universe))
    bracket = 1.0 - k * s / m + (ONE_MINUS_INV_E * s / m) ** k
    raw = unique * bracket
    return Bound(_clamp(raw), 0.0 <= bracket <= 1.0, raw)


def rsbf_fnr_bound(m: float, s: float, k: float, universe: float) -> Bound:
    """Upper bound ``k (m - s) / (U m)`` on the false-negative probability."""
    if not (m >= s >= 1 and k >= 1 and universe >= 1):
        raise ValueError("need m >= s >= 1, k >= 1, U >= 1")
    raw = k * (m - s) / (universe * m)
    return Bound(_clamp(raw), raw <= 1.0, raw)


def rsbf_fnr_asymptote(k: float, universe: float) -> Bound:
    """Large-stream order of the FNR, ``k / U``."""
    raw = k / universe
    return Bound(_clamp(raw), raw <= 1.0, raw)


def expected_ones_step(ones: float, s: float, p_insert: float) -> tuple[float, float]:
    """One-step drift of the ones count in a single filter.

    Returns ``(eps, ones + p_insert*eps)`` with
    ``eps = 1 - ones*(2s - 1)/s**2``.
    """
    if not (s >= 1 and 0 <= ones <= s and 0 <= p_insert <= 1):
        raise ValueError("need s >= 1, 0 <= ones <= s, 0 <= p_insert <= 1")
    eps = 1.0 - ones * (2.0 * s - 1.0) / (s * s)
    assert abs(eps) <= 1.0 + 1e-12
    return eps, ones + p_insert * eps


def ones_fixed_point(s: float) -> float:
    """Occupancy at which the expected drift vanishes, ``s**2 / (2s - 1)``."""
    return s * s / (2.0 * s - 1.0)


def ones_variance(beta: float, p_insert: float) -> float:
    """Published variance of the one-step ones change,
    ``p (beta**2 + (beta - 1)**2) - p**2``.

    Note the ``-p**2`` term: the exact variance subtracts the squared
    drift ``(p * eps)**2`` instead; see :func:`ones_variance_exact`.
    """
    if not (0 <= beta <= 1 and 0 <= p_insert <= 1):
        raise ValueError("need 0 <= beta <= 1 and 0 <= p_insert <= 1")
    return p_insert * (beta**2 + (beta - 1.0) ** 2) - p_insert**2


def ones_variance_exact(ones: float, s: float, p_insert: float) -> float:
    """Exact variance of the one-step change under reset-then-set dynamics."""
    up = p_insert * ((s - ones) / s) ** 2
    down = p_insert * ones * (ones - 1.0) / (s * s)
    mean = up - down
    return up + down - mean * mean


def initial_fpr_components(s: int, k: int) -> tuple[float, float]:
    """Probability that all ``k`` probed bits are set after the first ``s``
    insertions: ``(exact, approx)`` = ``((1-(1-1/s)**s)**k, (1-1/e)**k)``."""
    if s < 1 or k < 1:
        raise ValueError("need s >= 1, k >= 1")
    exact = (1.0 - (1.0 - 1.0 / s) ** s) ** k
    return _clamp(exact), ONE_MINUS_INV_E**k


def plan_k_raw(fpr_threshold: float) -> float:
    """Filter count that meets ``fpr_threshold`` right after warm-up:
    ``ln(FPR_t) / ln(1 - 1/e)``."""
    if not 0.0 < fpr_threshold < 1.0:
        raise ValueError("fpr_threshold must be in (0, 1)")
    if fpr_threshold == ONE_MINUS_INV_E:
        return 1.0
    return math.log(fpr_threshold) / math.log(ONE_MINUS_INV_E)


def plan_k(k_raw: float) -> int:
    """Round the mean of 1 and ``k_raw`` half-up, never below 1."""
    return max(1, math.floor((1.0 + k_raw) / 2.0 + 0.5))
