import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bubbleshoot.errors import PrecisionError
from bubbleshoot.logmath import (
    guarded_exp,
    guarded_exp_flagged,
    log1pexp,
    logaddexp,
    logistic,
    logsumexp,
    two_sum,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_guarded_exp_oracles():
    assert guarded_exp(0.0, 700.0) == 1.0
    with pytest.raises(PrecisionError) as info:
        guarded_exp(700.1, 700.0)
    assert info.value.log_value == 700.1
    value, flagged = guarded_exp_flagged(-1e6, 700.0)
    assert value == 0.0 and flagged
    assert guarded_exp_flagged(-10.0)[1] is False


def test_error_record_kind():
    try:
        guarded_exp(800.0)
    except PrecisionError as exc:
        d = exc.to_dict()
    assert d["kind"] == "precision" and d["log_value"] == 800.0


@given(finite, finite)
def test_logaddexp_symmetric_and_bounded(a, b):
    s = logaddexp(a, b)
    assert s == logaddexp(b, a)
    assert max(a, b) <= s <= max(a, b) + math.log(2.0) + 1e-12


def test_logaddexp_neg_inf():
    assert logaddexp(-math.inf, 3.0) == 3.0
    assert logaddexp(3.0, -math.inf) == 3.0


@given(st.lists(st.floats(-700, 700), min_size=1, max_size=30))
def test_logsumexp_matches_direct_sum(vals):
    expected = math.log(math.fsum(math.exp(v) for v in vals))
    assert logsumexp(vals) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_logsumexp_no_overflow():
    assert logsumexp([1000.0, 1000.0]) == pytest.approx(1000.0 + math.log(2.0), abs=1e-12)


@given(st.floats(-800, 800))
def test_log1pexp_and_logistic(x):
    y = log1pexp(x)
    assert y >= max(x, 0.0) - 1e-300
    s = logistic(x)
    assert 0.0 <= s <= 1.0
    assert logistic(-x) == pytest.approx(1.0 - s, abs=1e-15)


def test_log1pexp_array():
    x = np.array([-1000.0, 0.0, 1000.0])
    np.testing.assert_allclose(log1pexp(x), [0.0, math.log(2.0), 1000.0], atol=1e-15)


@given(st.floats(-1e300, 1e300), st.floats(-1e300, 1e300))
def test_two_sum_is_exact(a, b):
    s, e = two_sum(a, b)
    assert s == a + b
    if math.isfinite(s):
        # the error term recovers what rounding dropped
        from fractions import Fraction

        assert Fraction(s) + Fraction(e) == Fraction(a) + Fraction(b)
