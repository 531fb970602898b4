import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bubbleshoot.errors import BracketError, DomainError, PrecisionError
from bubbleshoot.growth import Weight, make_model
from bubbleshoot.solver import (
    SolverConfig,
    hermite_trapezoid,
    id0_consistency,
    identity_residuals,
    shoot,
    shoot_general,
    shoot_unit_lambda,
)

from .conftest import gelfand_lambda

GELFAND_MUS = [0.2, 1.0, 2 * math.log(2), 3.0, 5.0]


@pytest.mark.parametrize("mu", GELFAND_MUS)
def test_gelfand_closed_family(gelfand_model, mu):
    sol = shoot_unit_lambda(gelfand_model, mu=mu)
    assert sol.lam == pytest.approx(gelfand_lambda(mu), rel=1e-8)
    res = identity_residuals(sol)
    assert max(res.values()) < 1e-6
    assert id0_consistency(sol) < 1e-6


def test_gelfand_named_values(gelfand_model):
    assert shoot_unit_lambda(gelfand_model, mu=2 * math.log(2)).lam == pytest.approx(2.0, rel=1e-9)
    assert shoot_unit_lambda(gelfand_model, mu=0.2).lam == pytest.approx(0.68886, abs=1e-5)


@given(st.floats(0.05, 12.0))
def test_gelfand_property(mu):
    from bubbleshoot.growth import gelfand

    sol = shoot_unit_lambda(gelfand(), mu=mu)
    assert sol.lam == pytest.approx(gelfand_lambda(mu), rel=1e-8)


def test_solution_layout(cubic_model):
    sol = shoot_unit_lambda(cubic_model, mu=6.0)
    assert sol.t[-1] == 0.0 and sol.u[-1] == 0.0
    assert np.all(np.diff(sol.t) < 0)
    assert np.all(np.diff(sol.u) <= 0)
    assert np.all(sol.m >= 0)
    assert sol.r_zero_pre_rescale == pytest.approx(math.exp(-sol.info["t_cross"]))
    assert sol.log_lambda == pytest.approx(2 * math.log(sol.r_zero_pre_rescale))


def test_start_matches_center_expansion(cubic_model):
    sol = shoot_unit_lambda(cubic_model, mu=5.0)
    c = math.exp(sol.log_center_scale() - 2 * sol.t_start)
    assert sol.m[0] / (c / 2) == pytest.approx(1.0, abs=1e-5)


def test_general_matches_unit_lambda(gelfand_model):
    a = shoot_unit_lambda(gelfand_model, mu=1.0)
    b = shoot_general(gelfand_model, Weight(), 1.0)
    assert b.lam == pytest.approx(a.lam, rel=1e-8)
    assert abs(b.u[-1]) < 1e-10


def test_general_with_varying_weight(gelfand_model):
    sol = shoot(gelfand_model, 1.0, Weight((1.0, 0.0, 0.5)))
    assert max(identity_residuals(sol).values()) < 1e-6
    # frozen value of the shot
    assert sol.lam == pytest.approx(1.70781187, rel=1e-7)


def test_degenerate_bracket(gelfand_model):
    with pytest.raises(BracketError):
        shoot_general(gelfand_model, Weight(), 1.0, lambda_bracket=(1.0, 1.0))
    with pytest.raises(BracketError):
        shoot_general(gelfand_model, Weight(), 1.0, lambda_bracket=(2.0, 3.0))


def test_supercritical_residuals(cubic_model):
    sol = shoot_unit_lambda(cubic_model, mu=200 ** (1 / 3))
    assert max(identity_residuals(sol).values()) < 1e-4


def test_corrupted_mass_is_detected(gelfand_model):
    sol = shoot_unit_lambda(gelfand_model, mu=2 * math.log(2))
    bad = dataclasses.replace(sol, m=sol.m * 1.01)
    assert 3e-3 < identity_residuals(bad)["id1"] < 3e-2


def test_budget_error(cubic_model):
    with pytest.raises(PrecisionError) as info:
        shoot_unit_lambda(cubic_model, mu=9.5)
    assert info.value.stage == "budget"
    assert info.value.to_dict()["kind"] == "precision"


def test_compensated_mode_extends_budget(cubic_model):
    cfg = SolverConfig(scalar_mode="compensated")
    assert cfg.budget == 2 * SolverConfig().budget
    sol = shoot_unit_lambda(cubic_model, mu=9.5, cfg=cfg)
    assert max(identity_residuals(sol).values()) < 1e-6
    ref = shoot_unit_lambda(cubic_model, mu=6.0)
    comp = shoot_unit_lambda(cubic_model, mu=6.0, cfg=cfg)
    assert comp.log_lambda == pytest.approx(ref.log_lambda, abs=1e-10)


def test_domain_errors(cubic_model):
    with pytest.raises(DomainError):
        shoot_unit_lambda(cubic_model, mu=-1.0)
    with pytest.raises(DomainError):
        shoot_unit_lambda(cubic_model, Weight((1.0, 1.0)), mu=2.0)
    with pytest.raises(DomainError):
        SolverConfig(eps0=0.5)
    with pytest.raises(DomainError):
        SolverConfig(scalar_mode="quad")


def test_multi_exp_shot():
    model = make_model("multi-exp", k=2, m=1)
    sol = shoot_unit_lambda(model, mu=6.1)
    assert max(identity_residuals(sol).values()) < 1e-6


def test_hermite_trapezoid_exact_for_cubics():
    t = np.linspace(0.0, 2.0, 7)
    v = t**3 - t
    dv = 3 * t**2 - 1
    assert hermite_trapezoid(t, v, dv)[-1] == pytest.approx(4.0 - 2.0, rel=1e-14)


def test_hermite_trapezoid_nonfinite_derivative():
    t = np.array([0.0, 0.5, 1.0])
    out = hermite_trapezoid(t, np.array([0.0, 0.5, 1.0]), np.array([np.inf, 1.0, 1.0]))
    assert out[-1] == pytest.approx(0.5)


def test_deterministic(cubic_model):
    a = shoot_unit_lambda(cubic_model, mu=5.5)
    b = shoot_unit_lambda(cubic_model, mu=5.5)
    np.testing.assert_array_equal(a.u, b.u)
    assert a.log_lambda == b.log_lambda
