"""Invariant suites behind ``bubbleshoot verify``.

Each suite returns ``{"suite", "ok", "checks"}`` where every check records a
name, the measured value, the tolerance and a verdict.
"""

from __future__ import annotations

import math

import numpy as np

from .growth import check_H1, gelfand, growth_suite, make_model
from .profiles import normalization_data, ode_residual, profile_mass, regular_profile, tower_profile
from .recurrence import build_table, check_lemma_b3, limit_continuity
from .solver import id0_consistency, identity_residuals, shoot_unit_lambda

SUITES = ("growth", "profiles", "identities", "recurrence")

PROFILE_AS = (2.0, 1.4641, 1.0, 0.5, 0.1)
GELFAND_MUS = (0.2, 1.0, 2.0 * math.log(2.0), 3.0, 5.0)


def _check(name, value, tol, ok=None):
    if ok is None:
        ok = bool(np.isfinite(value) and value <= tol)
    return {"name": name, "value": value, "tol": tol, "ok": bool(ok)}


def _result(name, checks):
    return {"suite": name, "ok": all(c["ok"] for c in checks), "checks": checks}


def gelfand_lambda(mu):
    """Closed-form ``lambda(mu) = 8 alpha/(1 + alpha)^2``, ``alpha = e^{mu/2} - 1``."""
    alpha = math.expm1(0.5 * mu)
    return 8.0 * alpha / (1.0 + alpha) ** 2


def run_growth():
    checks = []
    for entry in growth_suite():
        spec = entry["model"]
        for key, ok in entry["decreasing"].items():
            last = entry["rows"][-1][key]
            checks.append(_check(f"{spec} {key} decreasing", last, None, ok=ok))
        checks.append(_check(f"{spec} ku", abs(entry["ku"] - entry["ku_bound"]), 0.02))
    # log factors make Q, P drift like 1/log t, hence the wider limit tolerance
    for family, params, limit_tol in (
        ("power-exp", {"p": 3.0}, 0.05),
        ("power-exp", {"p": 1.5}, 0.05),
        ("power-exp-log", {"p": 2.0, "l": 1.0}, 0.1),
        ("multi-exp", {"k": 2, "m": 1.0}, 0.05),
        ("multi-exp", {"k": 2, "m": 2.0}, 0.05),
        ("multi-exp", {"k": 3, "m": 1.0}, 0.05),
    ):
        model = make_model(family, **params)
        rep = check_H1(model, limit_tol=limit_tol)
        checks.append(_check(f"{model.spec} growth hypothesis", 0.0, None, ok=rep["ok"]))
    return _result("growth", checks)


def run_profiles():
    checks = []
    grid = np.geomspace(1e-3, 1e3, 241)
    for a in PROFILE_AS:
        prof = tower_profile(a)
        exact, quad = profile_mass(prof)
        checks.append(_check(f"mass a={a:g}", abs(quad - exact) / exact, 1e-8))
        checks.append(_check(f"ode a={a:g}", ode_residual(prof, grid), 1e-9))
        _, z, rz1 = normalization_data(prof)
        checks.append(_check(f"normalization a={a:g}", max(abs(z), abs(rz1 + 2.0)), 1e-10))
    prof = regular_profile()
    exact, quad = profile_mass(prof)
    checks.append(_check("mass regular", abs(quad - exact) / exact, 1e-8))
    checks.append(_check("ode regular", ode_residual(prof, grid), 1e-9))
    return _result("profiles", checks)


def run_identities():
    checks = []
    model = gelfand()
    for mu in GELFAND_MUS:
        sol = shoot_unit_lambda(model, mu=mu)
        exact = gelfand_lambda(mu)
        checks.append(_check(f"lambda mu={mu:.6g}", abs(sol.lam - exact) / exact, 1e-8))
        for key, val in identity_residuals(sol).items():
            checks.append(_check(f"{key} mu={mu:.6g}", val, 1e-6))
        checks.append(_check(f"id0 mu={mu:.6g}", id0_consistency(sol), 1e-6))
    return _result("identities", checks)


def run_recurrence():
    checks = []
    tab = build_table(1.5, 2)
    checks.append(_check("delta_2 q=1.5", abs(tab.delta[1] - (math.sqrt(3.0) - 1.0) / 2.0), 1e-12))
    checks.append(_check("a_2 q=1.5", abs(tab.a[1] - (2.0 * math.sqrt(3.0) - 2.0)), 1e-12))
    for q in (1.0, 1.1, 1.5, 1.9):
        checks.append(_check(f"weighted-sum identity q={q:g}", check_lemma_b3(build_table(q, 50)), 1e-10))
    rows, summary = limit_continuity([1.0 + 10.0**-j for j in range(1, 7)], 2)
    checks.append(_check("q->1 a_2 gap decreasing", rows[-1]["gap_a"], None, ok=summary["a_gap_decreasing"]))
    checks.append(_check("q->1 a_2 gap", rows[-1]["gap_a"], 1e-3))
    return _result("recurrence", checks)


def run_suite(name):
    runners = {
        "growth": run_growth,
        "profiles": run_profiles,
        "identities": run_identities,
        "recurrence": run_recurrence,
    }
    return runners[name]()
