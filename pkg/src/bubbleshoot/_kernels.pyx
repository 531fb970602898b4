# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled integration kernel; same algorithm and outputs as ``_kernels_py``."""

from libc.math cimport exp, log, pow, sqrt, fabs, INFINITY, NAN
from libc.stdlib cimport malloc, realloc, free

import numpy as np

BACKEND = "cython"

cdef enum:
    ST_CROSSED = 0
    ST_REACHED_STOP = 1
    ST_MAX_STEPS = 2
    ST_CAP = 3
    ST_NOT_MONOTONE = 4
    ST_STEP_UNDERFLOW = 5
    ST_NO_MEMORY = 6

cdef double EXP_LIMIT = 709.0

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double A71 = 35.0 / 384, A73 = 500.0 / 1113, A74 = 125.0 / 192, A75 = -2187.0 / 6784, A76 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40


cdef struct Model:
    int code
    double p, l
    int k
    double t_ext, e0, e1, e2
    double *hc
    int nh
    double log_lambda
    double cap
    int failed
    double bad_log


cdef inline double g_of(Model *md, double u) noexcept nogil:
    cdef double d, v
    cdef int i
    if u < md.t_ext:
        d = u - md.t_ext
        return md.e0 + md.e1 * d + 0.5 * md.e2 * d * d
    if md.code == 0:
        return u
    if md.code == 1:
        return pow(u, md.p)
    if md.l != 0.0:
        v = pow(u, md.p) * pow(log(u), md.l)
    else:
        v = pow(u, md.p)
    if md.code == 2:
        return v
    for i in range(md.k - 1):
        if v > EXP_LIMIT:
            md.failed = 1
            md.bad_log = v
            return 0.0
        v = exp(v)
    return v


cdef inline double log_h(Model *md, double t) noexcept nogil:
    cdef double r, acc
    cdef int i
    if md.nh == 1:
        return log(md.hc[0])
    r = exp(-t)
    acc = md.hc[md.nh - 1]
    i = md.nh - 2
    while i >= 0:
        acc = acc * r + md.hc[i]
        i -= 1
    return log(acc)


cdef inline double rhs(Model *md, double t, double u) noexcept nogil:
    cdef double e
    if md.failed:
        return 0.0
    e = md.log_lambda + g_of(md, u) + log_h(md, t) - 2.0 * t
    if md.failed:
        return 0.0
    if e > md.cap:
        md.failed = 1
        md.bad_log = e
        return 0.0
    return -exp(e)


cdef inline void dp_step(Model *md, double t, double u, double m, double k1u, double k1m,
                         double h, double *out) noexcept nogil:
    cdef double u2, m2, k2u, k2m, u3, m3, k3u, k3m, u4, m4, k4u, k4m
    cdef double u5, m5, k5u, k5m, u6, m6, k6u, k6m, du, dm, k7u, k7m
    u2 = u + h * (A21 * k1u)
    m2 = m + h * (A21 * k1m)
    k2u = m2
    k2m = rhs(md, t + C2 * h, u2)
    u3 = u + h * (A31 * k1u + A32 * k2u)
    m3 = m + h * (A31 * k1m + A32 * k2m)
    k3u = m3
    k3m = rhs(md, t + C3 * h, u3)
    u4 = u + h * (A41 * k1u + A42 * k2u + A43 * k3u)
    m4 = m + h * (A41 * k1m + A42 * k2m + A43 * k3m)
    k4u = m4
    k4m = rhs(md, t + C4 * h, u4)
    u5 = u + h * (A51 * k1u + A52 * k2u + A53 * k3u + A54 * k4u)
    m5 = m + h * (A51 * k1m + A52 * k2m + A53 * k3m + A54 * k4m)
    k5u = m5
    k5m = rhs(md, t + C5 * h, u5)
    u6 = u + h * (A61 * k1u + A62 * k2u + A63 * k3u + A64 * k4u + A65 * k5u)
    m6 = m + h * (A61 * k1m + A62 * k2m + A63 * k3m + A64 * k4m + A65 * k5m)
    k6u = m6
    k6m = rhs(md, t + h, u6)
    du = h * (A71 * k1u + A73 * k3u + A74 * k4u + A75 * k5u + A76 * k6u)
    dm = h * (A71 * k1m + A73 * k3m + A74 * k4m + A75 * k5m + A76 * k6m)
    k7u = m + dm
    k7m = rhs(md, t + h, u + du)
    out[0] = du
    out[1] = dm
    out[2] = k7u
    out[3] = k7m
    out[4] = h * (E1 * k1u + E3 * k3u + E4 * k4u + E5 * k5u + E6 * k6u + E7 * k7u)
    out[5] = h * (E1 * k1m + E3 * k3m + E4 * k4m + E5 * k5m + E6 * k6m + E7 * k7m)


cdef inline void two_sum(double a, double b, double *s, double *e) noexcept nogil:
    cdef double ss = a + b
    cdef double bb = ss - a
    s[0] = ss
    e[0] = (a - (ss - bb)) + (b - bb)


cdef inline void accumulate(double *hi, double *lo, double delta) noexcept nogil:
    cdef double s, e, s2, e2
    two_sum(hi[0], delta, &s, &e)
    e = e + lo[0]
    two_sum(s, e, &s2, &e2)
    hi[0] = s2
    lo[0] = e2


cdef int push(double **buf, int *cap_n, int n, double t, double u, double m) noexcept nogil:
    cdef double *nb
    if n >= cap_n[0]:
        nb = <double *> realloc(buf[0], 3 * 2 * cap_n[0] * sizeof(double))
        if nb == NULL:
            return 0
        buf[0] = nb
        cap_n[0] = 2 * cap_n[0]
    buf[0][3 * n] = t
    buf[0][3 * n + 1] = u
    buf[0][3 * n + 2] = m
    return 1


def integrate(int code, params, ext, hcoef, double log_lambda, double t_start, double u0,
              double m0, double t_stop, double rtol, double atol, double h_init,
              double max_step, long max_steps, double cap, bint stop_at_zero,
              bint compensated):
    """See ``_kernels_py.integrate``."""
    cdef Model md
    cdef double[::1] hc = np.ascontiguousarray(hcoef, dtype=np.float64)
    md.code = code
    md.p = float(params[0])
    md.l = float(params[1])
    md.k = int(params[2])
    md.t_ext = float(ext[0])
    md.e0 = float(ext[1])
    md.e1 = float(ext[2])
    md.e2 = float(ext[3])
    md.hc = &hc[0]
    md.nh = hc.shape[0]
    md.log_lambda = log_lambda
    md.cap = cap
    md.failed = 0
    md.bad_log = NAN

    cdef int cap_n = 1024
    cdef int n = 0
    cdef double *buf = <double *> malloc(3 * cap_n * sizeof(double))
    if buf == NULL:
        raise MemoryError()

    cdef double t = t_start, u = u0, m = m0
    cdef double t_lo = 0.0, u_lo = 0.0, m_lo = 0.0
    cdef double h = -fabs(h_init)
    cdef double facold = 1e-4, fac, fac11, err, sc_u, sc_m, h_new, un, mn
    cdef double k1u, k1m
    cdef double out[6]
    cdef long steps = 0, rejected = 0
    cdef int refine_iters = 0, it, side
    cdef double min_step = INFINITY
    cdef bint last_rejected = False, last
    cdef int status = ST_MAX_STEPS
    cdef double th_a, f_a, th_b, f_b, th, f, best_th, best_f, best_dm, tc, mc, dummy
    max_step = fabs(max_step)

    with nogil:
        push(&buf, &cap_n, n, t, u, m)
        n += 1
        k1u = m
        k1m = rhs(&md, t, u)
        while steps < max_steps and not md.failed:
            if fabs(h) > max_step:
                h = -max_step
            last = False
            if t + h <= t_stop:
                h = t_stop - t
                last = True
            if fabs(h) < 1e-14 * (fabs(t) if fabs(t) > 1.0 else 1.0):
                status = ST_STEP_UNDERFLOW
                break
            dp_step(&md, t, u, m, k1u, k1m, h, out)
            if md.failed:
                break
            un = u + out[0]
            mn = m + out[1]
            sc_u = atol + rtol * (fabs(u) if fabs(u) > fabs(un) else fabs(un))
            sc_m = atol + rtol * (fabs(m) if fabs(m) > fabs(mn) else fabs(mn))
            err = sqrt(0.5 * ((out[4] / sc_u) ** 2 + (out[5] / sc_m) ** 2))
            fac11 = pow(err, 0.17) if err > 0 else 0.0
            if err <= 1.0:
                steps += 1
                if not last and fabs(h) < min_step:
                    min_step = fabs(h)
                if stop_at_zero and un <= 0.0 and 0.0 < u:
                    # Illinois iteration on the step fraction
                    th_a = 0.0
                    f_a = u
                    th_b = 1.0
                    f_b = un
                    best_th = 1.0
                    best_f = un
                    best_dm = out[1]
                    side = 0
                    it = 0
                    for it in range(1, 51):
                        th = (th_a * f_b - th_b * f_a) / (f_b - f_a)
                        if not (th_a < th and th < th_b):
                            th = 0.5 * (th_a + th_b)
                        dp_step(&md, t, u, m, k1u, k1m, th * h, out)
                        f = u + out[0]
                        best_th = th
                        best_f = f
                        best_dm = out[1]
                        if fabs(f) < atol or th_b - th_a < 1e-15:
                            break
                        if (f > 0) == (f_a > 0):
                            th_a = th
                            f_a = f
                            if side == -1:
                                f_b *= 0.5
                            side = -1
                        else:
                            th_b = th
                            f_b = f
                            if side == 1:
                                f_a *= 0.5
                            side = 1
                    refine_iters = it
                    if compensated:
                        tc = t
                        dummy = t_lo
                        accumulate(&tc, &dummy, best_th * h)
                        mc = m
                        dummy = m_lo
                        accumulate(&mc, &dummy, best_dm)
                    else:
                        tc = t + best_th * h
                        mc = m + best_dm
                    if md.failed:
                        break
                    if not push(&buf, &cap_n, n, tc, best_f, mc):
                        status = ST_NO_MEMORY
                        break
                    n += 1
                    status = ST_CROSSED
                    break
                if mn < 0.0 or un > u:
                    status = ST_NOT_MONOTONE
                    break
                if compensated:
                    accumulate(&t, &t_lo, h)
                    accumulate(&u, &u_lo, out[0])
                    accumulate(&m, &m_lo, out[1])
                    if last:
                        t = t_stop
                        t_lo = 0.0
                else:
                    t = t_stop if last else t + h
                    u = un
                    m = mn
                if not push(&buf, &cap_n, n, t, u, m):
                    status = ST_NO_MEMORY
                    break
                n += 1
                k1u = out[2]
                k1m = out[3]
                if last:
                    status = ST_REACHED_STOP
                    break
                fac = fac11 / pow(facold, 0.04) if fac11 > 0 else 0.0
                fac = fac / 0.9
                if fac > 5.0:
                    fac = 5.0
                if fac < 0.1:
                    fac = 0.1
                h_new = h / fac
                if last_rejected and fabs(h_new) > fabs(h):
                    h_new = h
                facold = err if err > 1e-4 else 1e-4
                last_rejected = False
                h = h_new
            else:
                rejected += 1
                fac = fac11 / 0.9
                h = h / (fac if fac < 5.0 else 5.0)
                last_rejected = True

    if md.failed:
        status = ST_CAP
    if status == ST_NO_MEMORY:
        free(buf)
        raise MemoryError()
    arr = np.empty((n, 3), dtype=np.float64)
    cdef double[:, ::1] view = arr
    cdef int i
    for i in range(n):
        view[i, 0] = buf[3 * i]
        view[i, 1] = buf[3 * i + 1]
        view[i, 2] = buf[3 * i + 2]
    free(buf)
    info = {
        "status": status,
        "steps": steps,
        "rejected": rejected,
        "min_step": min_step,
        "refine_iters": refine_iters,
        "bad_log": md.bad_log,
    }
    return arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(), info
