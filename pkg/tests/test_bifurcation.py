import math

import numpy as np
import pytest

from bubbleshoot.bifurcation import (
    Branch,
    slope_sign_changes,
    subcritical_check,
    sweep,
    thread_count,
    turning_points,
)
from bubbleshoot.errors import DomainError, PrecisionError
from bubbleshoot.growth import make_model

from .conftest import gelfand_lambda


@pytest.fixture(scope="module")
def gelfand_branch(gelfand_model):
    return sweep(gelfand_model, mu_grid=np.linspace(0.2, 5.0, 25))


def test_gelfand_branch_matches_closed_form(gelfand_branch):
    for p in gelfand_branch.points:
        assert p.lam == pytest.approx(gelfand_lambda(p.mu), rel=1e-8)
        assert p.bubble_count == 1
        assert max(p.residuals.values()) < 1e-6


def test_small_mu_linear_regime(gelfand_model):
    br = sweep(gelfand_model, mu_grid=[1e-4, 2e-4, 4e-4])
    for p in br.points:
        assert p.lam / p.mu == pytest.approx(4.0, rel=1e-3)


def test_gelfand_single_turning_point(gelfand_branch):
    tps = turning_points(gelfand_branch)
    assert len(tps) == 1
    tp = tps[0]
    assert tp.kind == "max" and tp.certified
    assert abs(tp.mu - 2 * math.log(2)) < 1e-4
    assert abs(tp.lam - 2.0) < 1e-6
    assert tp.shots <= 40
    assert gelfand_branch.turning_flags().count(1) == 1


def test_cubic_branch_oscillates(cubic_model):
    br = sweep(cubic_model, mu_grid=np.linspace(0.5, 4.0, 36), with_residuals=False)
    tps = turning_points(br)
    assert len(tps) >= 2
    assert all(tp.certified for tp in tps)
    kinds = [tp.kind for tp in tps]
    assert all(a != b for a, b in zip(kinds, kinds[1:]))


def test_subcritical_branch_has_no_fold_in_tail():
    model = make_model("power-exp", p=1.5)
    mus = [G ** (2 / 3) for G in (20, 40, 80, 160)]
    br = sweep(model, mu_grid=mus, with_residuals=False)
    assert turning_points(br) == []
    assert np.all(np.diff(br.log_lambda) < 0)


def test_empty_and_short_branches(gelfand_model):
    br = sweep(gelfand_model, mu_grid=[])
    assert br.points == [] and turning_points(br) == []
    assert turning_points(sweep(gelfand_model, mu_grid=[1.0, 2.0])) == []


def test_grid_must_increase(gelfand_model):
    with pytest.raises(DomainError):
        sweep(gelfand_model, mu_grid=[2.0, 1.0])


def test_errors_carry_mu(cubic_model):
    with pytest.raises(PrecisionError) as info:
        sweep(cubic_model, mu_grid=[5.0, 9.5])
    assert info.value.to_dict()["mu"] == 9.5


def test_turning_points_need_model():
    with pytest.raises(DomainError):
        turning_points(Branch(points=[object()] * 3))


def test_slope_sign_changes():
    x = np.linspace(0, 3, 31)
    assert slope_sign_changes(x, np.sin(x)) == [16]
    assert slope_sign_changes(x, x) == []
    assert slope_sign_changes([0, 1], [0, 1]) == []


def test_subcritical_trends():
    model = make_model("power-exp", p=1.5)
    rep = subcritical_check(model, [G ** (2 / 3) for G in (50, 100, 200, 400)])
    assert rep["log_inv_lambda_target"] == pytest.approx(0.25)
    assert all(rep["monotone"].values())
    last = rep["rows"][-1]
    assert last["log_inv_lambda_gap"] < 0.05
    assert last["energy_f_gap"] < 0.3 and last["energy_fprime_gap"] < 0.3


def test_subcritical_domain(cubic_model):
    with pytest.raises(DomainError):
        subcritical_check(cubic_model, [1.0, 2.0])
    model = make_model("power-exp", p=1.5)
    with pytest.raises(DomainError):
        subcritical_check(model, [2.0, 1.0])
    with pytest.raises(DomainError):
        subcritical_check(model, [1.0, 2.0], sample_radii=(1.5,))


def test_thread_env(monkeypatch, gelfand_model):
    monkeypatch.setenv("BUBBLESHOOT_THREADS", "1")
    assert thread_count() == 1
    serial = sweep(gelfand_model, mu_grid=[0.5, 1.0, 1.5])
    monkeypatch.setenv("BUBBLESHOOT_THREADS", "4")
    parallel = sweep(gelfand_model, mu_grid=[0.5, 1.0, 1.5])
    assert serial.log_lambda.tolist() == parallel.log_lambda.tolist()
    for bad in ("0", "x"):
        monkeypatch.setenv("BUBBLESHOOT_THREADS", bad)
        with pytest.raises(DomainError):
            thread_count()
