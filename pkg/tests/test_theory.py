import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rsbf import theory


def test_classic_fpr_values():
    assert theory.classic_fpr(0, 1000, 4) == 0.0
    # mpmath: (1 - e^-0.75)^6
    assert theory.classic_fpr(1000, 8000, 6) == pytest.approx(0.0215771414632192, rel=1e-12)


@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(1, 2**20), st.integers(1, 20))
def test_classic_fpr_monotone_in_n(n1, n2, m, k):
    lo, hi = sorted((n1, n2))
    assert theory.classic_fpr(lo, m, k) <= theory.classic_fpr(hi, m, k)


def test_optimal_k():
    assert theory.optimal_k(8, 1) == pytest.approx(5.545177444479562)
    assert theory.optimal_k(100, 100) == pytest.approx(0.6931471805599453)
    assert theory.optimal_k(0, 5) == 0.0


def test_fpr_bound_reference_point():
    b = theory.rsbf_fpr_bound(10**6, 5461, 3, 10**6)
    assert b.value == pytest.approx(0.3618523064932986, rel=1e-10)
    assert b.valid


def test_fpr_bound_vanishes_for_long_streams():
    assert theory.rsbf_fpr_bound(10**9, 5461, 3, 10**6).value < 1e-300
    assert theory.rsbf_fpr_bound(10**6, 10, 3, 2).value == pytest.approx(0.0, abs=1e-300)


def test_fpr_bound_clamps_outside_validity():
    b = theory.rsbf_fpr_bound(5461, 5461, 3, 10**12)
    assert b.value == 0.0 and not b.valid and b.raw < 0


def test_fnr_bound():
    assert theory.rsbf_fnr_bound(5461, 5461, 3, 10**6).value == 0.0
    assert theory.rsbf_fnr_bound(10**6, 5461, 3, 10**6).value == pytest.approx(2.983617e-06, rel=1e-9)
    assert theory.rsbf_fnr_bound(10**15, 5461, 3, 10**6).value == pytest.approx(3e-6, rel=1e-6)
    assert theory.rsbf_fnr_asymptote(3, 10**6).value == pytest.approx(3e-6)


def test_expected_ones_step():
    assert theory.expected_ones_step(0, 1000, 0.3) == (1.0, 0.3)
    eps, nxt = theory.expected_ones_step(500, 1000, 0.1)
    assert eps == pytest.approx(0.0005)
    assert nxt == pytest.approx(500.00005)
    lam = theory.ones_fixed_point(1000)
    assert theory.expected_ones_step(lam, 1000, 0.5)[0] == pytest.approx(0.0, abs=1e-12)


@given(st.integers(1, 10**6), st.floats(0, 1), st.floats(0, 1))
def test_drift_bounded(s, frac, p):
    eps, _ = theory.expected_ones_step(frac * s, s, p)
    assert abs(eps) <= 1.0


def test_ones_variance():
    assert theory.ones_variance(0.5, 0.1) == pytest.approx(0.04)
    assert theory.ones_variance(0.3, 0.0) == 0.0
    for p in (0.01, 0.2, 0.7):
        assert theory.ones_variance(0.5, p) == pytest.approx(p / 2 - p * p)


def test_exact_variance_agrees_when_drift_is_unity():
    # empty filter: every insertion adds exactly one
    assert theory.ones_variance_exact(0, 100, 0.3) == pytest.approx(0.3 - 0.09)


def test_initial_fpr_components():
    exact, approx = theory.initial_fpr_components(10**7, 1)
    assert exact == pytest.approx(1 - 1 / math.e, rel=1e-6)
    assert theory.initial_fpr_components(100, 3)[1] == pytest.approx(0.2525804578276472)
    assert theory.initial_fpr_components(5461, 3)[0] == pytest.approx(0.2526208391663206, rel=1e-9)
    assert theory.initial_fpr_components(1, 7)[0] == 1.0


def test_plan_k_raw():
    assert theory.plan_k_raw(0.1) == pytest.approx(5.020078188563857, rel=1e-12)
    assert theory.plan_k_raw(0.01) == pytest.approx(10.040156377127713, rel=1e-12)
    assert theory.plan_k_raw(theory.ONE_MINUS_INV_E) == 1.0


def test_plan_k_rounds_half_up():
    assert theory.plan_k(5.020078) == 3
    assert theory.plan_k(2.0) == 2  # mean 1.5 -> 2
    assert theory.plan_k(0.2) == 1


@given(
    st.integers(1, 10**9), st.integers(1, 10**6), st.integers(1, 30), st.integers(2, 10**9)
)
def test_bounds_are_probabilities(m, s, k, U):
    m = max(m, s)
    assert 0.0 <= theory.rsbf_fpr_bound(m, s, k, U).value <= 1.0
    assert 0.0 <= theory.rsbf_fnr_bound(m, s, k, U).value <= 1.0
