"""Radial shooting for ``-u'' - u'/r = lambda h(r) f(u)`` on the unit disc.

Work is done in ``t = log(1/r)`` with ``m = -r u'``:

    u_t = m,    m_t = -w,    w = exp(log lambda + g(u) + log h(r) - 2t),

integrated from a start radius near the center outward.  With constant h
the problem is scale invariant, so one integration with ``lambda = 1`` and a
shift of t fixes the boundary condition; non-constant weights use an outer
root search on ``log lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    BracketError,
    DomainError,
    IntegratorError,
    NonTerminationError,
    PrecisionError,
)
from .growth import Weight, log_antiderivative_many
from .logmath import guarded_exp, guarded_exp_flagged  # noqa: F401  (re-exported)

SCALAR_MODES = ("binary64", "compensated")


@dataclass(frozen=True)
class SolverConfig:
    """Numerical settings for one shot.

    ``eps0`` scales the start radius against the center length scale,
    ``t_padding`` is how far past ``r = 1`` (in t) the search for the zero of
    u may run, and ``scalar_mode="compensated"`` switches on compensated
    state accumulation and doubles the exponent budget.
    """

    eps0: float = 1e-3
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 200_000
    exponent_cap: float = 700.0
    t_padding: float = 50.0
    max_step: float = 0.25
    h_init: float = 1e-2
    scalar_mode: str = "binary64"
    backend: str | None = None

    def __post_init__(self):
        if not (0.0 < self.eps0 <= 0.1):
            raise DomainError(f"eps0 must lie in (0, 0.1], got {self.eps0!r}")
        if not (self.rtol > 0 and self.atol > 0):
            raise DomainError("tolerances must be positive")
        if self.scalar_mode not in SCALAR_MODES:
            raise DomainError(f"scalar_mode must be one of {SCALAR_MODES}")
        if self.max_steps < 1 or self.max_step <= 0 or self.t_padding <= 0:
            raise DomainError("max_steps, max_step and t_padding must be positive")

    @property
    def budget(self):
        """Largest admissible ``g(mu) + log g'(mu)``."""
        return 2.0 * self.exponent_cap if self.scalar_mode == "compensated" else self.exponent_cap

    def integrator(self):
        return kernels.get_backend(self.backend) if self.backend else kernels.integrate


@dataclass(frozen=True, eq=False)
class RadialSolution:
    """Samples of one solution, ordered from the center (large t) to ``r = 1``.

    ``t``, ``u`` and ``m`` are numpy arrays; ``t`` decreases strictly and ends
    at 0.  ``r_zero_pre_rescale`` is the radius where u vanished in the
    ``lambda = 1`` integration (1 for the general shooter).
    """

    model: object
    weight: Weight
    mu: float
    log_lambda: float
    t: np.ndarray
    u: np.ndarray
    m: np.ndarray
    r_zero_pre_rescale: float
    steps: int
    rejected: int
    min_step: float
    scalar_mode: str
    backend: str
    info: dict = field(default_factory=dict)

    @property
    def r(self):
        return np.exp(-self.t)

    @property
    def lam(self):
        return math.exp(self.log_lambda)

    @property
    def t_start(self):
        return float(self.t[0])

    def log_rhs(self):
        """``log(lambda h f(u) r^2)`` at every sample."""
        g = np.asarray(self.model.g(self.u), dtype=float)
        return self.log_lambda + g + np.log(self.weight.h(self.r)) - 2.0 * self.t

    def log_center_scale(self):
        """``log(lambda h(0) f(mu))``, the leading coefficient near r = 0."""
        return self.log_lambda + math.log(self.weight.h0) + float(self.model.g(self.mu))


# ---------------------------------------------------------------------------
# start data


def _check_budget(model, mu, cfg):
    if not mu > model.t0:
        raise DomainError(f"mu={mu!r} must exceed t0={model.t0!r}")
    lg = model.log_derivs(mu)
    g_mu = math.exp(lg[0]) if math.isfinite(lg[0]) else 0.0
    log_g1 = lg[1] if math.isfinite(lg[1]) else 0.0
    load = g_mu + log_g1
    if load >= cfg.budget:
        raise PrecisionError(
            f"g(mu) + log g'(mu) = {load:.6g} exceeds the exponent budget {cfg.budget:.6g}; "
            "use a smaller mu or scalar_mode='compensated'",
            log_value=load,
            stage="budget",
        )


def start_data(model, weight, mu, log_lambda, eps0):
    """``(t_start, u0, m0)`` from the center expansion.

    The start radius is ``eps0`` times the center scale
    ``(lambda h(0) f(mu) max(g'(mu), 1))^{-1/2}``, capped at ``eps0``.
    """
    g_mu, g1_mu, _ = (float(v) for v in model.derivs(mu))
    lf = log_lambda + g_mu  # log(lambda f(mu))
    log_c = lf + math.log(weight.h0)
    scale = log_c + max(math.log(g1_mu), 0.0) if g1_mu > 0 else log_c
    t_start = -math.log(eps0) + 0.5 * max(scale, 0.0)
    cr2 = math.exp(log_c - 2.0 * t_start)
    u0 = mu - cr2 / 4.0 + cr2 * cr2 * g1_mu / 64.0
    m0 = cr2 / 2.0 - cr2 * cr2 * g1_mu / 16.0
    # first-order response to r^i terms of the weight
    for i, ci in enumerate(weight.coeffs[1:], start=1):
        if ci == 0.0:
            continue
        term = ci * math.exp(lf - (2 + i) * t_start)
        u0 -= term / (i + 2) ** 2
        m0 += term / (i + 2)
    return t_start, u0, m0


def _run(model, weight, mu, log_lambda, cfg, t_stop, stop_at_zero):
    t_start, u0, m0 = start_data(model, weight, mu, log_lambda, cfg.eps0)
    code, params, ext = model.kernel_args()
    ts, us, ms, info = cfg.integrator()(
        code,
        params,
        ext,
        np.asarray(weight.coeffs, dtype=float),
        float(log_lambda),
        t_start,
        u0,
        m0,
        float(t_stop),
        cfg.rtol,
        cfg.atol,
        cfg.h_init,
        cfg.max_step,
        int(cfg.max_steps),
        min(cfg.exponent_cap, 709.0),
        bool(stop_at_zero),
        cfg.scalar_mode == "compensated",
    )
    status = info["status"]
    if status == kernels.ST_CAP:
        raise PrecisionError(
            f"right-hand side exponent {info['bad_log']:.6g} exceeds the cap; "
            "use a smaller mu or scalar_mode='compensated'",
            log_value=info["bad_log"],
            stage="rhs",
        )
    if status == kernels.ST_NOT_MONOTONE:
        raise IntegratorError(f"monotonicity lost near t={ts[-1]:.6g}")
    if status == kernels.ST_STEP_UNDERFLOW:
        raise IntegratorError(f"step size underflow near t={ts[-1]:.6g}")
    if status == kernels.ST_MAX_STEPS:
        raise IntegratorError(f"max_steps={cfg.max_steps} reached at t={ts[-1]:.6g}")
    return ts, us, ms, info


# ---------------------------------------------------------------------------
# shooters


def shoot_unit_lambda(model, weight=None, mu=None, cfg=None):
    """Shoot with ``lambda = 1`` and rescale so that ``u(1) = 0``.

    Requires a constant weight.  The returned solution has
    ``log_lambda = -2 t_c`` where ``t_c`` is the crossing in the unscaled run.
    """
    weight = weight or Weight()
    cfg = cfg or SolverConfig()
    if mu is None:
        raise DomainError("mu is required")
    mu = float(mu)
    if not weight.is_constant:
        raise DomainError("shoot_unit_lambda needs a constant weight; use shoot_general")
    _check_budget(model, mu, cfg)
    ts, us, ms, info = _run(model, weight, mu, 0.0, cfg, -cfg.t_padding, True)
    if info["status"] != kernels.ST_CROSSED:
        raise NonTerminationError(
            f"u stayed positive down to t={-cfg.t_padding!r} (r = e^{cfg.t_padding:g})"
        )
    t_c = float(ts[-1])
    t = ts - t_c
    t[-1] = 0.0
    u = us.copy()
    info = dict(info, u_cross=float(u[-1]), t_cross=t_c)
    u[-1] = 0.0
    return RadialSolution(
        model=model,
        weight=weight,
        mu=mu,
        log_lambda=-2.0 * t_c,
        t=t,
        u=u,
        m=ms,
        r_zero_pre_rescale=math.exp(-t_c),
        steps=info["steps"],
        rejected=info["rejected"],
        min_step=info["min_step"],
        scalar_mode=cfg.scalar_mode,
        backend=kernels.BACKEND if cfg.backend is None else cfg.backend,
        info=info,
    )


def boundary_value(model, weight, mu, log_lambda, cfg):
    """``u(1)`` for a given ``log lambda`` together with the samples."""
    ts, us, ms, info = _run(model, weight, mu, log_lambda, cfg, 0.0, False)
    if info["status"] != kernels.ST_REACHED_STOP:
        raise IntegratorError("integration did not reach r = 1")
    return float(us[-1]), (ts, us, ms, info)


def shoot_general(model, weight, mu, cfg=None, lambda_bracket=(1e-3, 10.0), max_iter=200):
    """Find ``lambda`` in ``lambda_bracket`` with ``u(1) = 0``.

    Illinois false position on ``log lambda``; the bracket must contain a
    sign change of ``u(1; lambda)``.
    """
    cfg = cfg or SolverConfig()
    mu = float(mu)
    lo, hi = (float(x) for x in lambda_bracket)
    if not (0.0 < lo < hi):
        raise BracketError(f"lambda bracket must satisfy 0 < lo < hi, got {lambda_bracket!r}")
    _check_budget(model, mu, cfg)
    a, b = math.log(lo), math.log(hi)
    fa, run_a = boundary_value(model, weight, mu, a, cfg)
    fb, run_b = boundary_value(model, weight, mu, b, cfg)
    if fa == 0.0:
        return _general_solution(model, weight, mu, a, run_a, cfg, 0)
    if fb == 0.0:
        return _general_solution(model, weight, mu, b, run_b, cfg, 0)
    if (fa > 0) == (fb > 0):
        raise BracketError(f"u(1) has the same sign at both ends: {fa!r}, {fb!r}")
    side = 0
    best = (a, fa, run_a) if abs(fa) < abs(fb) else (b, fb, run_b)
    it = 0
    for it in range(1, max_iter + 1):
        x = (a * fb - b * fa) / (fb - fa)
        if not (min(a, b) < x < max(a, b)):
            x = 0.5 * (a + b)
        fx, run_x = boundary_value(model, weight, mu, x, cfg)
        if abs(fx) < abs(best[1]):
            best = (x, fx, run_x)
        if abs(fx) < cfg.atol or abs(b - a) < 4e-16 * max(1.0, abs(x)):
            break
        if (fx > 0) == (fa > 0):
            a, fa = x, fx
            if side == -1:
                fb *= 0.5
            side = -1
        else:
            b, fb = x, fx
            if side == 1:
                fa *= 0.5
            side = 1
    x, fx, run = best
    return _general_solution(model, weight, mu, x, run, cfg, it)


def _general_solution(model, weight, mu, log_lambda, run, cfg, iterations):
    ts, us, ms, info = run
    info = dict(info, outer_iterations=iterations, u_boundary=float(us[-1]))
    return RadialSolution(
        model=model,
        weight=weight,
        mu=mu,
        log_lambda=float(log_lambda),
        t=ts,
        u=us,
        m=ms,
        r_zero_pre_rescale=1.0,
        steps=info["steps"],
        rejected=info["rejected"],
        min_step=info["min_step"],
        scalar_mode=cfg.scalar_mode,
        backend=kernels.BACKEND if cfg.backend is None else cfg.backend,
        info=info,
    )


def shoot(model, mu, weight=None, cfg=None, lambda_bracket=None):
    """Dispatch to the unit-lambda shooter for constant weights."""
    weight = weight or Weight()
    if weight.is_constant:
        return shoot_unit_lambda(model, weight, mu, cfg)
    return shoot_general(model, weight, mu, cfg, lambda_bracket or (1e-3, 10.0))


# ---------------------------------------------------------------------------
# quadrature on the solution grid


def hermite_trapezoid(t, v, dv):
    """Cumulative ``int v dt`` along ``t`` using endpoint derivatives.

    Each interval contributes ``h (v_a + v_b)/2 + h^2 (v'_a - v'_b)/12``,
    which is exact for cubics.  Intervals with a non-finite endpoint
    derivative (``g''`` blows up at 0 when ``p < 2``) fall back to the plain
    trapezoid.  Returns the running integral, starting at 0.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    dv = np.asarray(dv, dtype=float)
    h = np.diff(t)
    with np.errstate(invalid="ignore"):
        corr = h * h * (dv[:-1] - dv[1:]) / 12.0
    corr = np.where(np.isfinite(corr), corr, 0.0)
    parts = 0.5 * h * (v[:-1] + v[1:]) + corr
    return np.concatenate(([0.0], np.cumsum(parts)))


def source_terms(sol):
    """``(w, dw/dt)`` with ``w = lambda h f(u) r^2`` on the (ascending-t) grid."""
    t = sol.t[::-1]
    u = sol.u[::-1]
    m = sol.m[::-1]
    r = np.exp(-t)
    g, g1, _ = (np.asarray(v, dtype=float) for v in sol.model.derivs(u))
    h = sol.weight.h(r)
    hp = sol.weight.h_prime(r)
    w = np.exp(sol.log_lambda + g + np.log(h) - 2.0 * t)
    dlogh = -r * hp / h
    dw = w * (g1 * m - 2.0 + dlogh)
    return t, u, m, r, w, dw


def identity_residuals(sol):
    """Relative residuals of the Green-type and Pohozaev identities.

    ``id1``: ``mu - u(1) = int_0^1 lambda h f(u) s log(1/s) ds`` over ``mu``,
    with the left side built from the mass samples as ``mu - u(r0) + int m dt``.
    ``id2``: the two-radius identity between the radius where u is closest
    to ``mu/2`` and the radius at half its t-value, over ``mu``.
    ``pohozaev``: ``(r u')^2 = 4 int lambda (1 + s h'/2h) h F(u) s ds
    - 2 lambda h F(u) r^2`` at ``r = 1``, over ``(r u'(1))^2``.
    Integrals use :func:`hermite_trapezoid`; the part inside the start radius
    is added from the center expansion.
    """
    if len(sol.t) < 3:
        raise DomainError("solution has too few samples")
    t, u, m, r, w, dw = source_terms(sol)
    T = t[-1]
    c_log = sol.log_center_scale()
    tail_w = math.exp(c_log - 2.0 * T) / 2.0  # int_T^inf c e^{-2s} ds
    tail_wt = math.exp(c_log - 2.0 * T) * (T / 2.0 + 0.25)

    # mu - u(1) = (mu - u(r0)) + int m dt, so corrupted mass samples show up
    cum_wt = hermite_trapezoid(t, w * t, dw * t + w)
    drop = (sol.mu - u[-1]) + hermite_trapezoid(t, m, -w)[-1]
    id1 = abs(drop - (cum_wt[-1] + tail_wt)) / abs(sol.mu)

    # id2 between two interior radii
    ia = int(np.argmin(np.abs(u - 0.5 * sol.mu)))
    ia = min(max(ia, 2), len(t) - 1)
    ib = int(np.argmin(np.abs(t - 0.5 * t[ia])))
    ib = min(max(ib, 1), ia - 1)
    cum_w = hermite_trapezoid(t, w, dw)
    mass_a = cum_w[-1] - cum_w[ia] + tail_w
    tb = t[ib]
    cum_shift = hermite_trapezoid(t, w * (t - tb), dw * (t - tb) + w)
    rhs2 = (t[ia] - tb) * mass_a + (cum_shift[ia] - cum_shift[ib])
    id2 = abs((u[ia] - u[ib]) - rhs2) / abs(sol.mu)

    # Pohozaev at r = 1
    wt = sol.weight
    h = wt.h(r)
    hp = wt.h_prime(r)
    hpp = wt.h_second(r)
    uc = np.maximum(u, 0.0)
    logF = log_antiderivative_many(sol.model, uc)
    P0 = np.exp(sol.log_lambda + np.log(h) + logF - 2.0 * t)
    k = 1.0 + r * hp / (2.0 * h)
    dk = -(r * hp + r * r * hpp) / (2.0 * h) + (r * hp) ** 2 / (2.0 * h * h)
    dP0 = w * m - P0 * (2.0 + r * hp / h)
    P = P0 * k
    dP = dP0 * k + P0 * dk
    cum_P = hermite_trapezoid(t, P, dP)
    logF_mu = float(log_antiderivative_many(sol.model, [sol.mu])[0])
    tail_P = math.exp(sol.log_lambda + math.log(wt.h0) + logF_mu - 2.0 * T) / 2.0
    lhs = m[0] ** 2
    boundary = 2.0 * P0[0]
    poho = abs(lhs - 4.0 * (cum_P[-1] + tail_P) + boundary) / lhs
    return {"id1": float(id1), "id2": float(id2), "pohozaev": float(poho)}


def id0_consistency(sol):
    """Largest ``|m(t_a) - m(t_b) - int w|`` over consecutive samples, relative to max m."""
    t, u, m, r, w, dw = source_terms(sol)
    cum = hermite_trapezoid(t, w, dw)
    # m decreases with t: m(t_i) - m(t_{i+1}) = int_{t_i}^{t_{i+1}} w
    diff = (m[:-1] - m[1:]) - np.diff(cum)
    return float(np.max(np.abs(diff)) / np.max(m))
