"""Interval helpers and the censored-trial estimate container."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from exwalk.lattice import RangeError
from exwalk.stats import Z95, EnEstimate, normal_ci, wilson_ci


def test_wilson_ci_known_value():
    # 50/100 at z=1.96: standard worked example
    lo, hi = wilson_ci(50, 100)
    assert math.isclose(lo, 0.40383, abs_tol=5e-5)
    assert math.isclose(hi, 0.59617, abs_tol=5e-5)


def test_wilson_ci_degenerate_counts():
    lo, hi = wilson_ci(0, 20)
    assert lo == 0.0 and 0.0 < hi < 0.2
    lo, hi = wilson_ci(20, 20)
    assert 0.8 < lo < 1.0 and hi == 1.0


def test_wilson_ci_empty():
    lo, hi = wilson_ci(0, 0)
    assert math.isnan(lo) and math.isnan(hi)


@given(st.integers(0, 500), st.integers(0, 500))
def test_wilson_ci_brackets_point_estimate(successes, decided):
    if decided == 0 or successes > decided:
        return
    lo, hi = wilson_ci(successes, decided)
    p = successes / decided
    assert 0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0
    # bracket up to float rounding at the p = 0 and p = 1 endpoints
    assert lo <= p + 1e-12 and p <= hi + 1e-12


def test_wilson_ci_rejects_bad_counts():
    with pytest.raises(RangeError):
        wilson_ci(5, 3)
    with pytest.raises(RangeError):
        wilson_ci(-1, 3)


def test_normal_ci():
    lo, hi = normal_ci(1.0, 0.5)
    assert math.isclose(hi - 1.0, Z95 * 0.5)
    assert math.isclose(1.0 - lo, Z95 * 0.5)


def test_en_estimate_partition_enforced():
    with pytest.raises(RangeError):
        EnEstimate(
            n=2, trials=10, hits=3, completions=3, censored=3,
            p_hat=0.5, wilson_ci=(0.2, 0.8),
        )


def test_en_estimate_from_counts():
    est = EnEstimate.from_counts(
        2, trials=110, hits=30, completions=70, censored=10, horizon=1000
    )
    assert est.trials == 110
    assert est.decided == 100
    assert math.isclose(est.p_hat, 0.3)
    lo, hi = est.wilson_ci
    assert lo < 0.3 < hi


def test_en_estimate_all_censored_is_nan():
    est = EnEstimate.from_counts(3, trials=5, hits=0, completions=0, censored=5)
    assert math.isnan(est.p_hat)
