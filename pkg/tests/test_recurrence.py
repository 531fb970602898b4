import math

import numpy as np

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bubbleshoot.errors import DomainError
from bubbleshoot.recurrence import (
    build_table,
    check_lemma_b3,
    divergence_proxy,
    lemma_b3_residuals,
    limit_continuity,
    step_limit,
    step_residual,
    step_supercritical,
)

SQRT3 = math.sqrt(3.0)


def test_cubic_first_step_closed_form():
    x, a = step_supercritical(2.0, 3.0)
    assert x == pytest.approx((SQRT3 - 1) / 2, abs=1e-12)
    assert a == pytest.approx(2 * SQRT3 - 2, abs=1e-12)


def test_quartic_first_step():
    x, _ = step_supercritical(2.0, 4.0)
    assert x**4 - 2 * x + 1 == pytest.approx(0.0, abs=1e-13)
    assert x == pytest.approx(0.5436890127, abs=1e-9)
    assert abs(step_residual(2.0, 4.0, x)) < 1e-13


def test_limit_steps():
    y, a = step_limit(2.0)
    assert 0.20 < y < 0.21
    assert math.log(y) == pytest.approx(2 * y - 2, abs=1e-12)
    assert y == pytest.approx(0.2031878699, abs=1e-9)
    y2, _ = step_limit(a)
    assert 0.35 < y2 < 0.37


def test_trivial_root_not_returned():
    assert step_residual(2.0, math.inf, 1.0) == pytest.approx(0.0, abs=1e-15)
    y, _ = step_limit(2.0)
    assert y < 1.0


@given(st.floats(0.05, 2.0), st.floats(2.05, 12.0))
def test_supercritical_step_properties(a, p):
    x, a_next = step_supercritical(a, p)
    assert 0.0 < x < 1.0
    assert 0.0 < a_next < a
    assert abs(step_residual(a, p, x)) < 1e-12


@given(st.floats(0.05, 2.0))
def test_limit_step_properties(a):
    y, a_next = step_limit(a)
    assert 0.0 < y < 1.0 and 0.0 < a_next < a
    assert abs(step_residual(a, math.inf, y)) < 1e-12


def test_step_domain():
    with pytest.raises(DomainError):
        step_supercritical(2.0, 2.0)
    with pytest.raises(DomainError):
        step_supercritical(2.5, 3.0)
    with pytest.raises(DomainError):
        build_table(2.0, 3)
    with pytest.raises(DomainError):
        build_table(1.5, 0)


def test_table_cubic():
    tab = build_table(1.5, 3)
    assert tab.a[:2] == pytest.approx((2.0, 2 * SQRT3 - 2), abs=1e-12)
    assert tab.delta[:2] == pytest.approx((1.0, (SQRT3 - 1) / 2), abs=1e-12)
    assert tab.eta[1] == pytest.approx(tab.delta[1] ** 3, rel=1e-13)


def test_table_limit_frozen():
    # frozen from a 30-digit mpmath bisection of the step equations
    tab = build_table(1.0, 3)
    assert tab.limit
    assert tab.eta == pytest.approx((1.0, 0.20318786997998, 0.0734462032232565), rel=1e-12)
    assert tab.a == pytest.approx((2.0, 1.18724852008008, 0.84790709921862), rel=1e-12)
    assert tab.delta == (1.0, 1.0, 1.0)


def test_rows_layout():
    rows = build_table(1.5, 4).rows()
    assert [r[0] for r in rows] == [1, 2, 3, 4]
    assert rows[0][1:] == (2.0, 1.0, 1.0, 1.0)


def test_weighted_sum_identity_first_entry_exact():
    for q in (1.0, 1.3, 1.7):
        assert lemma_b3_residuals(build_table(q, 1))[0] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("q", [1.0, 1.5])
def test_weighted_sum_identity_twenty(q):
    assert check_lemma_b3(build_table(q, 20)) < 1e-10


@given(st.floats(1.0, 1.95))
def test_weighted_sum_identity_property(q):
    assert check_lemma_b3(build_table(q, 12)) < 1e-10


def test_continuity_to_limit():
    rows, summary = limit_continuity([1 + 10.0**-j for j in range(1, 7)], 2)
    assert summary["a_gap_decreasing"] and summary["eta_gap_decreasing"]
    assert rows[-1]["gap_a"] < 1e-3
    assert summary["a_ref"] == pytest.approx(1.1872485, rel=1e-6)
    for r in rows:
        assert r["eta_k"] == pytest.approx(r["delta_k"] ** (r["q"] / (r["q"] - 1)), rel=1e-10)


def test_continuity_first_index_constant():
    rows, _ = limit_continuity([1.5, 1.1, 1.01], 1)
    assert all(r["a_k"] == 2.0 for r in rows)


def test_partial_sums_grow():
    tab = build_table(1.5, 200)
    sums = tab.partial_sums()
    assert all(b > a for a, b in zip(sums, sums[1:]))
    total, big = divergence_proxy(tab)
    assert big and total == pytest.approx(sums[-1])


@pytest.mark.parametrize("q", [1.0 + 2.0**-52, 1.0 + 1e-13, 1.0 + 1e-9])
def test_huge_exponent_approaches_limit(q):
    near = build_table(q, 3)
    lim = build_table(1.0, 3)
    assert check_lemma_b3(near) < 1e-10
    np.testing.assert_allclose(near.a, lim.a, rtol=1e-6)
