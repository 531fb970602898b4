"""Branches ``mu -> lambda(mu)``, their turning points and subcritical trends.

A branch is traced as a graph over ``mu = u(0)``: every point is one
independent shot, so shots run concurrently.  Turning points are extrema of
``log lambda`` along the branch; they are located from sign changes of the
discrete slope and refined by golden-section search with fresh shots.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import _Track, compute_diagnostics, detect_bubbles, total_energy, total_mass_scaled
from .errors import BubbleShootError, DomainError
from .growth import Weight
from .solver import SolverConfig, identity_residuals, shoot

THREADS_ENV = "BUBBLESHOOT_THREADS"
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def thread_count():
    """Worker count from ``BUBBLESHOOT_THREADS`` (default: CPU count, at most 8)."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise DomainError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
        if n < 1:
            raise DomainError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return n
    return max(1, min(8, os.cpu_count() or 1))


def _parallel_map(fn, items):
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _annotate(exc, mu):
    exc.context = dict(getattr(exc, "context", {}), mu=mu)
    if exc.args:
        exc.args = (f"mu={mu!r}: {exc.args[0]}",) + exc.args[1:]
    return exc


def _shot(model, weight, mu, cfg):
    try:
        return shoot(model, mu, weight, cfg)
    except BubbleShootError as exc:
        raise _annotate(exc, mu) from None


@dataclass(frozen=True)
class BranchPoint:
    mu: float
    log_lambda: float
    total_energy: float
    bubble_count: int
    residuals: dict = field(default_factory=dict)

    @property
    def lam(self):
        return math.exp(self.log_lambda)


@dataclass(frozen=True)
class TurningPoint:
    """A refined extremum of ``log lambda`` with its slope certificate.

    ``flanks`` are the two shots around ``mu`` used for the certificate and
    ``slopes`` the discrete slopes ``(mu, flank)``; they have opposite signs
    when ``certified``.
    """

    mu: float
    log_lambda: float
    kind: str
    flanks: tuple
    slopes: tuple
    shots: int
    certified: bool

    @property
    def lam(self):
        return math.exp(self.log_lambda)


@dataclass(frozen=True)
class Branch:
    points: list
    turning_points: list = field(default_factory=list)
    model: object = None
    weight: object = None
    cfg: object = None

    @property
    def mu(self):
        return np.array([p.mu for p in self.points])

    @property
    def log_lambda(self):
        return np.array([p.log_lambda for p in self.points])

    def turning_flags(self):
        """1 at the grid point nearest to each turning point, else 0."""
        flags = [0] * len(self.points)
        mus = self.mu
        for tp in self.turning_points:
            if len(mus):
                flags[int(np.argmin(np.abs(mus - tp.mu)))] = 1
        return flags


def _point(model, weight, mu, cfg, with_residuals=True):
    sol = _shot(model, weight, mu, cfg)
    diag = compute_diagnostics(sol)
    count = len(detect_bubbles(diag, sol))
    res = identity_residuals(sol) if with_residuals else {}
    return BranchPoint(
        mu=sol.mu,
        log_lambda=sol.log_lambda,
        total_energy=total_energy(sol),
        bubble_count=count,
        residuals=res,
    )


def sweep(model, weight=None, mu_grid=(), cfg=None, with_residuals=True):
    """One shot per ``mu`` (run concurrently); returns a :class:`Branch`."""
    weight = weight or Weight()
    cfg = cfg or SolverConfig()
    mus = [float(x) for x in mu_grid]
    if any(b <= a for a, b in zip(mus, mus[1:])):
        raise DomainError("mu_grid must be strictly increasing")
    points = _parallel_map(lambda mu: _point(model, weight, mu, cfg, with_residuals), mus)
    return Branch(points=points, model=model, weight=weight, cfg=cfg)


def slope_sign_changes(mus, values):
    """Indices ``i`` where the discrete slope changes sign across point ``i``."""
    mus = np.asarray(mus, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(mus) < 3:
        return []
    slopes = np.diff(values) / np.diff(mus)
    out = []
    for i in range(1, len(slopes)):
        if slopes[i - 1] * slopes[i] < 0:
            out.append(i)
    return out


def _refine(model, weight, cfg, lo, mid, hi, f_mid, kind, width, budget):
    """Golden-section search for the extremum of log lambda inside ``[lo, hi]``."""
    sign = 1.0 if kind == "max" else -1.0
    cache = {mid: f_mid}
    shots = 0

    def f(mu):
        nonlocal shots
        if mu not in cache:
            shots += 1
            cache[mu] = _shot(model, weight, mu, cfg).log_lambda
        return cache[mu]

    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    while b - a > width and shots + 1 < budget:
        if sign * f(c) > sign * f(d):
            b, d = d, c
            c = b - _INV_PHI * (b - a)
        else:
            a, c = c, d
            d = a + _INV_PHI * (b - a)
    inside = [m for m in cache if a <= m <= b] or [0.5 * (a + b)]
    best = max(inside, key=lambda m: sign * f(m))
    # certificate: one shot on each side, half a bracket away
    step = max(0.5 * (b - a), width)
    left, right = best - step, best + step
    fl, fb, fr = f(left), f(best), f(right)
    slopes = ((fb - fl) / (best - left), (fr - fb) / (right - best))
    certified = slopes[0] * slopes[1] < 0 and sign * slopes[0] > 0
    return TurningPoint(
        mu=best,
        log_lambda=fb,
        kind=kind,
        flanks=(left, right),
        slopes=slopes,
        shots=shots,
        certified=certified,
    )


def turning_points(branch, width=1e-5, budget=40):
    """Refined extrema of ``log lambda`` along ``branch``.

    Each discrete slope sign change is bracketed by its two neighbouring grid
    points and refined with at most ``budget`` fresh shots until the
    ``mu``-bracket is below ``width``.  Refinements run concurrently.
    Returns the list of :class:`TurningPoint` (also stored on the branch).
    """
    pts = branch.points
    if len(pts) < 3:
        return []
    if branch.model is None:
        raise DomainError("branch carries no model; build it with sweep()")
    mus = [p.mu for p in pts]
    vals = [p.log_lambda for p in pts]
    jobs = []
    for i in slope_sign_changes(mus, vals):
        kind = "max" if vals[i] > vals[i - 1] else "min"
        jobs.append((mus[i - 1], mus[i], mus[i + 1], vals[i], kind))
    model, weight = branch.model, branch.weight or Weight()
    cfg = branch.cfg or SolverConfig()
    found = _parallel_map(lambda j: _refine(model, weight, cfg, *j, width, budget), jobs)
    branch.turning_points[:] = found
    return found


def subcritical_check(model, mu_ladder, sample_radii=(0.5,), weight=None, cfg=None):
    """Trend report for a subcritical model (``q > 2``) along a ``mu`` ladder.

    Rows hold ``g'(mu) int lambda h f r dr`` and ``int lambda h f' r dr``
    (both against 4), ``g'(mu) u(r) / (4 log(1/r))`` at each sample radius
    (against 1) and ``log(1/lambda)/g(mu)`` (against ``(2 - p)/2``).  The
    ``monotone`` flags say whether each gap sequence strictly decreases.
    """
    q, p = model.nominal_q, model.nominal_p
    if not q > 2.0:
        raise DomainError(f"subcritical check needs q > 2, got q={q!r}")
    mus = [float(x) for x in mu_ladder]
    if any(b <= a for a, b in zip(mus, mus[1:])):
        raise DomainError("mu ladder must be strictly increasing")
    radii = [float(r) for r in sample_radii]
    if any(not (0.0 < r < 1.0) for r in radii):
        raise DomainError("sample radii must lie in (0, 1)")
    weight = weight or Weight()
    cfg = cfg or SolverConfig()
    lam_target = (2.0 - p) / 2.0
    sols = _parallel_map(lambda mu: _shot(model, weight, mu, cfg), mus)
    rows = []
    for sol in sols:
        g_mu, g1_mu, _ = (float(v) for v in model.derivs(sol.mu))
        track = _Track(sol)
        green = {}
        for r in radii:
            u_r = track.state(-math.log(r))[0]
            green[r] = g1_mu * u_r / (4.0 * math.log(1.0 / r))
        row = {
            "mu": sol.mu,
            "g_mu": g_mu,
            "energy_f": total_mass_scaled(sol, model),
            "energy_fprime": total_energy(sol, model),
            "green": green,
            "log_inv_lambda_over_g": -sol.log_lambda / g_mu,
        }
        row["energy_f_gap"] = abs(row["energy_f"] - 4.0)
        row["energy_fprime_gap"] = abs(row["energy_fprime"] - 4.0)
        row["green_gap"] = {r: abs(v - 1.0) for r, v in green.items()}
        row["log_inv_lambda_gap"] = abs(row["log_inv_lambda_over_g"] - lam_target)
        rows.append(row)

    def strictly_decreasing(vals):
        return all(b < a for a, b in zip(vals, vals[1:]))

    monotone = {
        key: strictly_decreasing([row[key] for row in rows])
        for key in ("energy_f_gap", "energy_fprime_gap", "log_inv_lambda_gap")
    }
    for r in radii:
        monotone[f"green_gap[{r:g}]"] = strictly_decreasing([row["green_gap"][r] for row in rows])
    return {
        "q": q,
        "p": p,
        "log_inv_lambda_target": lam_target,
        "rows": rows,
        "monotone": monotone,
    }
