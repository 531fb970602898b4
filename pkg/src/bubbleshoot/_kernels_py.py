"""Pure-Python integration kernel; the compiled module mirrors it line by line.

The system in ``t = log(1/r)`` is

    u_t = m,    m_t = -exp(log_lambda + g(u) + log h(e^{-t}) - 2t),

integrated from the center side (large t) toward decreasing t with a
Dormand-Prince 5(4) pair and Hairer's PI step-size controller.
"""

import math

import numpy as np

# status codes shared with the compiled kernel
ST_CROSSED = 0
ST_REACHED_STOP = 1
ST_MAX_STEPS = 2
ST_CAP = 3
ST_NOT_MONOTONE = 4
ST_STEP_UNDERFLOW = 5

BACKEND = "python"

_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_A71, _A73, _A74, _A75, _A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)
_EXP_LIMIT = 709.0


class _CapExceeded(Exception):
    def __init__(self, value):
        self.value = value


def _make_rhs(code, params, ext, hcoef, log_lambda, cap):
    p, l, k, _ = (float(x) for x in params)
    k = int(k)
    t_ext, e0, e1, e2 = (float(x) for x in ext)
    hc = [float(c) for c in hcoef]
    nh = len(hc)
    exp = math.exp
    log = math.log

    def g_of(u):
        if u < t_ext:
            d = u - t_ext
            return e0 + e1 * d + 0.5 * e2 * d * d
        if code == 0:
            return u
        if code == 1:
            return u**p
        if code == 2:
            return u**p * log(u) ** l if l != 0.0 else u**p
        v = u**p * log(u) ** l if l != 0.0 else u**p
        for _ in range(k - 1):
            if v > _EXP_LIMIT:
                raise _CapExceeded(v)
            v = exp(v)
        return v

    def log_h(t):
        if nh == 1:
            return log(hc[0])
        r = exp(-t)
        acc = hc[nh - 1]
        for i in range(nh - 2, -1, -1):
            acc = acc * r + hc[i]
        return log(acc)

    def rhs(t, u):
        e = log_lambda + g_of(u) + log_h(t) - 2.0 * t
        if e > cap:
            raise _CapExceeded(e)
        return -exp(e)

    return rhs


def _dp_step(rhs, t, u, m, k1u, k1m, h):
    """One Dormand-Prince step; returns (u5, m5, k7u, k7m, err_u, err_m)."""
    # u' = m is linear, so the u-stages are the m-values of earlier stages
    u2 = u + h * (_A21 * k1u)
    m2 = m + h * (_A21 * k1m)
    k2u, k2m = m2, rhs(t + _C2 * h, u2)
    u3 = u + h * (_A31 * k1u + _A32 * k2u)
    m3 = m + h * (_A31 * k1m + _A32 * k2m)
    k3u, k3m = m3, rhs(t + _C3 * h, u3)
    u4 = u + h * (_A41 * k1u + _A42 * k2u + _A43 * k3u)
    m4 = m + h * (_A41 * k1m + _A42 * k2m + _A43 * k3m)
    k4u, k4m = m4, rhs(t + _C4 * h, u4)
    u5 = u + h * (_A51 * k1u + _A52 * k2u + _A53 * k3u + _A54 * k4u)
    m5 = m + h * (_A51 * k1m + _A52 * k2m + _A53 * k3m + _A54 * k4m)
    k5u, k5m = m5, rhs(t + _C5 * h, u5)
    u6 = u + h * (_A61 * k1u + _A62 * k2u + _A63 * k3u + _A64 * k4u + _A65 * k5u)
    m6 = m + h * (_A61 * k1m + _A62 * k2m + _A63 * k3m + _A64 * k4m + _A65 * k5m)
    k6u, k6m = m6, rhs(t + h, u6)
    du = h * (_A71 * k1u + _A73 * k3u + _A74 * k4u + _A75 * k5u + _A76 * k6u)
    dm = h * (_A71 * k1m + _A73 * k3m + _A74 * k4m + _A75 * k5m + _A76 * k6m)
    k7u, k7m = m + dm, rhs(t + h, u + du)
    eu = h * (_E1 * k1u + _E3 * k3u + _E4 * k4u + _E5 * k5u + _E6 * k6u + _E7 * k7u)
    em = h * (_E1 * k1m + _E3 * k3m + _E4 * k4m + _E5 * k5m + _E6 * k6m + _E7 * k7m)
    return du, dm, k7u, k7m, eu, em


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def integrate(
    code,
    params,
    ext,
    hcoef,
    log_lambda,
    t_start,
    u0,
    m0,
    t_stop,
    rtol,
    atol,
    h_init,
    max_step,
    max_steps,
    cap,
    stop_at_zero,
    compensated,
):
    """Integrate from ``t_start`` down to ``t_stop`` (or the first zero of u).

    Returns ``(t, u, m, info)`` with numpy arrays of accepted samples and an
    ``info`` dict: status, steps, rejected, min_step, refine_iters,
    bad_log (the offending exponent when the cap was hit).
    """
    rhs = _make_rhs(code, params, ext, hcoef, log_lambda, cap)
    ts, us, ms = [t_start], [u0], [m0]
    t, u, m = float(t_start), float(u0), float(m0)
    t_lo = u_lo = m_lo = 0.0
    h = -abs(float(h_init))
    max_step = abs(float(max_step))
    facold = 1e-4
    steps = rejected = refine_iters = 0
    min_step = math.inf
    last_rejected = False
    status = ST_MAX_STEPS
    bad_log = math.nan
    try:
        k1u, k1m = m, rhs(t, u)
        while steps < max_steps:
            if abs(h) > max_step:
                h = -max_step
            last = False
            if t + h <= t_stop:
                h = t_stop - t
                last = True
            if abs(h) < 1e-14 * max(1.0, abs(t)):
                status = ST_STEP_UNDERFLOW
                break
            du, dm, k7u, k7m, eu, em = _dp_step(rhs, t, u, m, k1u, k1m, h)
            un, mn = u + du, m + dm
            sc_u = atol + rtol * max(abs(u), abs(un))
            sc_m = atol + rtol * max(abs(m), abs(mn))
            err = math.sqrt(0.5 * ((eu / sc_u) ** 2 + (em / sc_m) ** 2))
            fac11 = err**0.17 if err > 0 else 0.0
            if err <= 1.0:
                steps += 1
                min_step = min(min_step, abs(h)) if not last else min_step
                if stop_at_zero and un <= 0.0 < u:
                    status, t, u, m, it = _refine_crossing(rhs, t, u, m, k1u, k1m, h, atol, compensated, t_lo, u_lo, m_lo)
                    refine_iters = it
                    ts.append(t)
                    us.append(u)
                    ms.append(m)
                    break
                if mn < 0.0 or un > u:
                    status = ST_NOT_MONOTONE
                    break
                if compensated:
                    t, t_lo = _accumulate(t, t_lo, h)
                    u, u_lo = _accumulate(u, u_lo, du)
                    m, m_lo = _accumulate(m, m_lo, dm)
                else:
                    t, u, m = (t_stop if last else t + h), un, mn
                if last and compensated:
                    t, t_lo = t_stop, 0.0
                ts.append(t)
                us.append(u)
                ms.append(m)
                k1u, k1m = k7u, k7m
                if last:
                    status = ST_REACHED_STOP
                    break
                fac = fac11 / facold**0.04 if fac11 > 0 else 0.0
                fac = max(0.1, min(5.0, fac / 0.9))
                h_new = h / fac
                if last_rejected and abs(h_new) > abs(h):
                    h_new = h
                facold = max(err, 1e-4)
                last_rejected = False
                h = h_new
            else:
                rejected += 1
                h = h / min(5.0, fac11 / 0.9)
                last_rejected = True
    except _CapExceeded as exc:
        status = ST_CAP
        bad_log = exc.value
    info = {
        "status": status,
        "steps": steps,
        "rejected": rejected,
        "min_step": min_step,
        "refine_iters": refine_iters,
        "bad_log": bad_log,
    }
    return np.array(ts), np.array(us), np.array(ms), info


def _accumulate(hi, lo, delta):
    s, e = _two_sum(hi, delta)
    e += lo
    return _two_sum(s, e)


def _refine_crossing(rhs, t, u, m, k1u, k1m, h, atol, compensated, t_lo, u_lo, m_lo):
    """Illinois iteration on the fraction theta of the step where u = 0."""
    th_a, f_a = 0.0, u
    du, dm, *_ = _dp_step(rhs, t, u, m, k1u, k1m, h)
    th_b, f_b = 1.0, u + du
    best = (th_b, f_b, dm)
    side = 0
    it = 0
    for it in range(1, 51):
        th = (th_a * f_b - th_b * f_a) / (f_b - f_a)
        if not (th_a < th < th_b):
            th = 0.5 * (th_a + th_b)
        du, dm, *_ = _dp_step(rhs, t, u, m, k1u, k1m, th * h)
        f = u + du
        best = (th, f, dm)
        if abs(f) < atol or th_b - th_a < 1e-15:
            break
        if (f > 0) == (f_a > 0):
            th_a, f_a = th, f
            if side == -1:
                f_b *= 0.5
            side = -1
        else:
            th_b, f_b = th, f
            if side == 1:
                f_a *= 0.5
            side = 1
    th, f, dm = best
    if compensated:
        tc, _ = _accumulate(t, t_lo, th * h)
        mc, _ = _accumulate(m, m_lo, dm)
    else:
        tc, mc = t + th * h, m + dm
    return ST_CROSSED, tc, f, mc, it
