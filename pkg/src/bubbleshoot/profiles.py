"""Radial Liouville profiles solving ``-z'' - z'/r = e^z`` with finite mass.

Two families are provided: the regular profile normalized at the origin,

    z0(r) = log 64 - 2 log(8 + r^2),              mass 4,

and the singular tower profiles normalized at ``r = a/sqrt(2)``,

    z(r) = log(2 a^2 b) - (2 - a) log r - 2 log(1 + b r^a),    b = (sqrt(2)/a)^a,

with mass ``2a`` (``a = 2`` is the regular bubble centered at its peak).
Everything is evaluated through ``sigma = b r^a / (1 + b r^a)`` in log form,
which keeps small ``a`` and extreme radii free of overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError
from .logmath import log1pexp, logistic

_LOG64 = math.log(64.0)
_LOG8 = math.log(8.0)


@dataclass(frozen=True)
class BubbleProfile:
    """A closed-form profile; ``kind`` is ``"regular0"`` or ``"tower"``."""

    kind: str
    a: float = 2.0

    def __post_init__(self):
        if self.kind not in ("regular0", "tower"):
            raise DomainError(f"unknown profile kind {self.kind!r}")
        if self.kind == "tower" and not (0.0 < self.a <= 2.0):
            raise DomainError(f"tower profile needs a in (0, 2], got {self.a!r}")

    @property
    def log_b(self):
        # z0 is the a = 2 form with b = 1/8 (normalized at the origin)
        if self.kind == "regular0":
            return -_LOG8
        return self.a * math.log(math.sqrt(2.0) / self.a)

    @property
    def b(self):
        return math.exp(self.log_b)

    @property
    def mass(self):
        return 4.0 if self.kind == "regular0" else 2.0 * self.a

    @property
    def regular_at_origin(self):
        return self.kind == "regular0" or self.a == 2.0


def regular_profile():
    return BubbleProfile("regular0", 2.0)


def tower_profile(a):
    return BubbleProfile("tower", float(a))


def z_of_log_r(profile, log_r):
    """``z`` as a function of ``log r``; usable where ``r`` itself underflows."""
    a = profile.a
    s = profile.log_b + a * np.asarray(log_r, dtype=float)
    z = math.log(2.0 * a * a) + profile.log_b - (2.0 - a) * log_r - 2.0 * log1pexp(s)
    return float(z) if np.ndim(z) == 0 else z


def eval_profile(profile, r):
    """``(z, z', z'')`` at radius ``r`` (scalar or array)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("radius must be nonnegative")
    if np.any(r == 0) and not profile.regular_at_origin:
        raise DomainError(f"tower profile with a={profile.a!r} is singular at r = 0")
    if profile.kind == "regular0":
        r2 = r * r
        den = 8.0 + r2
        z = _LOG64 - 2.0 * np.log(den)
        z1 = -4.0 * r / den
        z2 = -4.0 * (8.0 - r2) / (den * den)
        return _out(z, z1, z2)
    a = profile.a
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = np.log(r)
        s = profile.log_b + a * log_r
        sig = logistic(s)
        om = logistic(-s)  # 1 - sigma without cancellation
        z = z_of_log_r(profile, log_r)
        z1 = ((a - 2.0) - 2.0 * a * sig) / r
        z2 = ((2.0 - a) + 2.0 * a * sig - 2.0 * a * a * sig * om) / (r * r)
    if np.any(r == 0):
        # a == 2 here: z = log 4 - 2 log(1 + r^2/2)
        z = np.where(r == 0, math.log(4.0), z)
        z1 = np.where(r == 0, 0.0, z1)
        z2 = np.where(r == 0, -2.0, z2)
    return _out(z, z1, z2)


def _out(*arrays):
    if all(np.ndim(x) == 0 for x in arrays):
        return tuple(float(x) for x in arrays)
    return arrays


def r2_exp_z(profile, r):
    """``r^2 e^{z(r)}`` in the overflow-free form ``2 a^2 sigma (1 - sigma)``."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        log_r = np.log(r)
    s = profile.log_b + profile.a * log_r
    return 2.0 * profile.a**2 * logistic(s) * logistic(-s)


def _center_log_r(profile):
    return -profile.log_b / profile.a


def profile_mass(profile, rel_tol=1e-12):
    """``(analytic, quadrature)`` values of ``int_0^inf e^z r dr``.

    The quadrature runs in ``s = log r`` over ``exp(z + 2s)`` with z from
    the closed form, across a window where the integrand is
    above ``e^{-45}`` of its peak.
    """
    slope = profile.a
    center = _center_log_r(profile)
    half = 45.0 / slope

    def integrand(s):
        return math.exp(z_of_log_r(profile, s) + 2.0 * s)

    total = 0.0
    # split at the peak and at a few unit widths so quad sees the bulk
    knots = [center - half, center - 5.0 / slope, center, center + 5.0 / slope, center + half]
    for lo, hi in zip(knots, knots[1:]):
        val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=rel_tol, limit=200)
        total += val
    return profile.mass, total


def ode_residual(profile, grid, shift=0.0):
    """Largest ``|-z'' - z'/r - e^{z + shift}| / e^z`` over ``grid``.

    ``shift`` perturbs the value only, so the result measures how far the
    perturbed function is from a solution (about ``|shift|`` for small shifts).
    """
    r = np.asarray(grid, dtype=float)
    if np.any(r <= 0):
        raise DomainError("ode_residual needs positive radii")
    z, z1, z2 = (np.asarray(v) for v in eval_profile(profile, r))
    ez = r2_exp_z(profile, r) / (r * r)
    res = np.abs(-z2 - z1 / r - ez * math.exp(shift)) / ez
    return float(np.max(res))


def normalization_data(profile):
    """``(r*, z(r*), r* z'(r*))`` at ``r* = a/sqrt(2)``; expected ``(r*, 0, -2)``."""
    if profile.kind != "tower":
        raise DomainError("normalization data applies to tower profiles only")
    rs = profile.a / math.sqrt(2.0)
    z, z1, _ = eval_profile(profile, rs)
    return rs, z, rs * z1


def peak_of_r2ez(profile):
    """``(r, value)`` of the maximum of ``r^2 e^z``; ``(a/sqrt 2, a^2/2)`` for towers."""
    if profile.kind == "regular0":
        return math.sqrt(8.0), 2.0
    return profile.a / math.sqrt(2.0), profile.a**2 / 2.0
