import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from bubbleshoot.errors import DomainError, PrecisionError, SpecSyntaxError
from bubbleshoot.growth import (
    Weight,
    antiderivative_F,
    check_H1,
    evaluate,
    gelfand,
    growth_suite,
    lemma_g1_residual,
    lemma_g3_residual,
    lemma_g4_residual,
    log_antiderivative_many,
    make_model,
    parse_model,
    parse_weight,
    q_p_estimate,
    residuals_decreasing,
    verify_growth_lemmas,
)


# --- closed forms ---------------------------------------------------------


def test_evaluate_cubic():
    assert evaluate(make_model("power-exp", p=3), 2.0) == (8.0, 12.0, 12.0)


def test_evaluate_double_exponential():
    g, g1, g2 = evaluate(make_model("multi-exp", k=2, m=1), 3.0)
    e3 = math.exp(3.0)
    assert g == pytest.approx(e3, rel=1e-15)
    assert g1 == pytest.approx(e3, rel=1e-15)
    assert g2 == pytest.approx(e3, rel=1e-15)
    assert g == pytest.approx(20.0855, abs=1e-4)


def test_pure_exp_only_as_validation_family():
    with pytest.raises(DomainError):
        make_model("pure-exp")
    m = gelfand()
    assert evaluate(m, 5.0) == (5.0, 1.0, 0.0)
    assert m.validation_only


def test_evaluate_below_t0():
    with pytest.raises(DomainError):
        evaluate(make_model("power-exp-log", p=2, l=1), 1.0)


def test_tower_overflow_names_stage():
    m = make_model("multi-exp", k=3, m=1)
    with pytest.raises(PrecisionError) as info:
        evaluate(m, 800.0)
    assert info.value.stage == 1


def test_log_derivs_past_overflow():
    # g = e^{e^t} is not representable at t = 7 but its logs are
    m = make_model("multi-exp", k=3, m=1)
    lg, lg1, lg2 = m.log_derivs(7.0)
    assert lg == pytest.approx(math.exp(7.0), rel=1e-14)
    assert lg1 == pytest.approx(math.exp(7.0) + 7.0, rel=1e-14)


# --- Q and P --------------------------------------------------------------


def test_q_p_cubic_exact():
    rep = q_p_estimate(make_model("power-exp", p=3), [1.0, 10.0, 1e3, 1e5])
    for _, q, p in rep["rows"]:
        assert q == pytest.approx(1.5, rel=1e-14)
        assert p == pytest.approx(3.0, rel=1e-14)


def test_q_p_double_exponential():
    rep = q_p_estimate(make_model("multi-exp", k=2, m=1), [40.0])
    _, q, p = rep["rows"][0]
    assert q == pytest.approx(1.0, rel=1e-14)
    assert p == pytest.approx(40.0, rel=1e-14)


def test_q_p_power_log_limits():
    m = make_model("power-exp-log", p=2, l=1)
    rep = q_p_estimate(m, [1e6 / 2**j for j in range(6, -1, -1)])
    assert rep["drift_q"] <= 0.01 and rep["drift_p"] <= 0.01
    assert abs(rep["last_q"] - 2.0) < 0.1 and abs(rep["last_p"] - 2.0) < 0.1


def test_nominal_pair_is_conjugate():
    for m in (make_model("power-exp", p=3), make_model("power-exp", p=1.5)):
        assert 1 / m.nominal_p + 1 / m.nominal_q == pytest.approx(1.0)
    m = make_model("multi-exp", k=2, m=1)
    assert m.nominal_q == 1.0 and math.isinf(m.nominal_p)


# --- H1 clauses -----------------------------------------------------------


def test_growth_hypothesis_double_exponential_all_pass():
    rep = check_H1(make_model("multi-exp", k=2, m=1))
    assert rep["ok"]
    assert rep["ii"]["tg_over_g_nondecreasing"] and rep["ii"]["hat_ratio_nonincreasing"]


def test_growth_hypothesis_cubic_second_clause_vacuous():
    rep = check_H1(make_model("power-exp", p=3))
    assert rep["ok"] and rep["ii"].get("vacuous")


def test_small_exponent_rejected():
    with pytest.raises(DomainError):
        make_model("power-exp", p=0.5)
    rep = check_H1(make_model("power-exp", p=0.5, validate=False))
    assert not rep["range"]["ok"] and not rep["ok"]


# --- antiderivative -------------------------------------------------------


def test_log_F_gelfand():
    assert antiderivative_F(gelfand(), 10.0) == pytest.approx(math.log(math.expm1(10.0)), rel=1e-13)
    assert antiderivative_F(gelfand(), 10.0) == pytest.approx(9.99995, abs=1e-5)


def test_log_F_at_zero():
    assert antiderivative_F(make_model("power-exp", p=3), 0.0) == -math.inf


def test_log_F_cubic_against_quad():
    m = make_model("power-exp", p=3)
    val, _ = integrate.quad(lambda s: math.exp(s**3), 0.0, 5.0, epsrel=1e-13, limit=200)
    assert antiderivative_F(m, 5.0) == pytest.approx(math.log(val), rel=1e-11)
    ratio = math.exp(antiderivative_F(m, 5.0)) * 75.0 / math.exp(125.0)
    assert ratio == pytest.approx(1.0, abs=0.02)


def test_log_F_many_matches_single():
    m = make_model("power-exp", p=1.5)
    ts = [0.0, 0.5, 2.0, 9.0, 30.0]
    many = log_antiderivative_many(m, ts)
    assert many[0] == -math.inf
    for t, v in zip(ts[1:], many[1:]):
        assert v == pytest.approx(antiderivative_F(m, t), rel=1e-12)


def test_log_F_huge_argument():
    # F itself overflows binary64 but log F does not
    m = make_model("multi-exp", k=2, m=1)
    lf = antiderivative_F(m, 7.0)
    assert lf > 709.0
    assert lf == pytest.approx(math.exp(7.0) - 7.0, abs=1e-3)


# --- lemma residual tables ------------------------------------------------


def test_g1_residual_cubic():
    m = make_model("power-exp", p=3)
    r100 = lemma_g1_residual(m, 100.0)
    assert r100 < 1e-2
    assert lemma_g1_residual(m, 200.0) < r100


def test_g3_exact_for_power():
    m = make_model("power-exp", p=3)
    assert lemma_g3_residual(m, 1e4, [0.5]) < 1e-6


def test_g4_double_exponential():
    m = make_model("multi-exp", k=2, m=2)
    a = lemma_g4_residual(m, 15.0, [0.7])
    b = lemma_g4_residual(m, 30.0, [0.7])
    assert a < 1e-3 and b < a


def test_verify_table_columns():
    rows = verify_growth_lemmas(make_model("power-exp", p=3), [10.0, 20.0])
    assert set(rows[0]) == {"t", "g1", "g3", "g4", "ku", "ku_bound"}
    assert math.isnan(rows[0]["g4"])
    rows = verify_growth_lemmas(make_model("multi-exp", k=2, m=1), [8.0, 16.0])
    assert math.isnan(rows[0]["g3"]) and rows[0]["ku_bound"] == 0.0


def test_residuals_decreasing_floor():
    assert residuals_decreasing([1e-3, 1e-5, 1e-14, 2e-14])
    assert not residuals_decreasing([1e-3, 2e-3])


def test_growth_suite_all_families():
    for entry in growth_suite():
        assert entry["ok"], entry["model"]


# --- spec strings and weights ---------------------------------------------


def test_parse_model_examples():
    assert parse_model("power-exp:p=3").p == 3.0
    m = parse_model("power-exp-log:p=2,l=1")
    assert (m.p, m.l) == (2.0, 1.0)
    m = parse_model("multi-exp:k=2,m=1,l=0")
    assert (m.k, m.m, m.l) == (2, 1.0, 0.0)
    assert parse_model("pure-exp").family == "pure-exp"


@pytest.mark.parametrize(
    "text, pos",
    [("power-exp:p=two", 10), ("power-exp:q=3", 10), (":p=3", 0), ("power-exp;p=3", 9)],
)
def test_parse_model_errors_carry_position(text, pos):
    with pytest.raises(SpecSyntaxError) as info:
        parse_model(text)
    assert info.value.position == pos


@given(st.floats(1.05, 8.0))
def test_parse_round_trip(p):
    m = parse_model(f"power-exp:p={p!r}")
    assert m.p == p
    assert parse_model(m.spec).p == p


def test_weights():
    w = parse_weight("poly:c0=1,c2=0.5")
    assert w.h(1.0) == 1.5 and w.h_prime(1.0) == 1.0 and not w.is_constant
    assert parse_weight("const").is_constant
    with pytest.raises(DomainError):
        Weight((1.0, -2.0))
