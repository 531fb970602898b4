import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bubbleshoot.errors import DomainError
from bubbleshoot.profiles import (
    eval_profile,
    normalization_data,
    ode_residual,
    peak_of_r2ez,
    profile_mass,
    r2_exp_z,
    regular_profile,
    tower_profile,
    z_of_log_r,
)

WIDE = np.geomspace(1e-6, 1e6, 401)


def test_regular_at_origin():
    z, z1, z2 = eval_profile(regular_profile(), 0.0)
    assert z == pytest.approx(0.0, abs=1e-15)
    assert z1 == 0.0


def test_a2_tower_closed_form():
    prof = tower_profile(2.0)
    assert prof.b == pytest.approx(0.5, rel=1e-15)
    r = np.array([0.0, 0.3, 1.0, 4.0])
    z = eval_profile(prof, r)[0]
    np.testing.assert_allclose(z, np.log(4.0 / (1 + r**2 / 2) ** 2), rtol=1e-14, atol=1e-15)
    assert eval_profile(prof, math.sqrt(2.0))[0] == pytest.approx(0.0, abs=1e-15)


def test_a1_slope_at_normalization_radius():
    r = 1 / math.sqrt(2.0)
    _, z1, _ = eval_profile(tower_profile(1.0), r)
    assert r * z1 == pytest.approx(-2.0, abs=1e-14)


def test_singular_tower_at_origin():
    with pytest.raises(DomainError):
        eval_profile(tower_profile(1.0), 0.0)
    with pytest.raises(DomainError):
        tower_profile(2.5)


@pytest.mark.parametrize("a, mass", [(2.0, 4.0), (1.4641, 2.9282), (1.0, 2.0), (0.5, 1.0), (0.1, 0.2)])
def test_tower_mass(a, mass):
    exact, quad = profile_mass(tower_profile(a))
    assert exact == pytest.approx(mass, rel=1e-15)
    assert quad == pytest.approx(exact, rel=1e-8)


def test_regular_mass():
    exact, quad = profile_mass(regular_profile())
    assert exact == 4.0 and quad == pytest.approx(4.0, rel=1e-8)


def test_mass_vanishes_with_a():
    exact, quad = profile_mass(tower_profile(1e-3))
    assert quad == pytest.approx(2e-3, rel=1e-8)


def test_ode_residuals():
    assert ode_residual(regular_profile(), np.geomspace(1e-3, 1e3, 241)) < 1e-9
    assert ode_residual(tower_profile(0.5), WIDE) < 1e-9


def test_perturbed_profile_fails_ode():
    res = ode_residual(regular_profile(), np.geomspace(1e-3, 1e3, 241), shift=0.01)
    assert res == pytest.approx(math.expm1(0.01), rel=1e-3)


@pytest.mark.parametrize("a", [2.0, 1.0, 0.1])
def test_normalization(a):
    rs, z, rz1 = normalization_data(tower_profile(a))
    assert rs == pytest.approx(a / math.sqrt(2.0), rel=1e-15)
    assert abs(z) < 1e-10 and abs(rz1 + 2.0) < 1e-10


@given(st.floats(0.01, 2.0))
def test_profile_properties(a):
    prof = tower_profile(a)
    assert ode_residual(prof, np.geomspace(1e-3, 1e3, 81)) < 1e-9
    r_pk, v_pk = peak_of_r2ez(prof)
    grid = r_pk * np.exp(np.linspace(-0.5, 0.5, 201))
    assert np.max(r2_exp_z(prof, grid)) <= v_pk * (1 + 1e-14)
    assert r2_exp_z(prof, r_pk) == pytest.approx(v_pk, rel=1e-14)


def test_extreme_radii_finite():
    prof = tower_profile(0.1)
    z = z_of_log_r(prof, np.array([-5000.0, 0.0, 5000.0]))
    assert np.all(np.isfinite(z))
