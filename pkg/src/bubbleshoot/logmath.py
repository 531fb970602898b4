"""Log-domain arithmetic helpers."""

import math

import numpy as np

from .errors import PrecisionError

DEFAULT_CAP = 700.0

NEG_INF = -math.inf


def guarded_exp(log_value, cap=DEFAULT_CAP):
    """Return ``exp(log_value)``, refusing exponents above ``cap``.

    Underflow to zero is allowed; :func:`guarded_exp_flagged` reports it.
    """
    if log_value > cap:
        raise PrecisionError(
            f"exponent {log_value!r} exceeds cap {cap!r}", log_value=log_value
        )
    return math.exp(log_value)


def guarded_exp_flagged(log_value, cap=DEFAULT_CAP):
    """Like :func:`guarded_exp` but also returns True when the result underflowed."""
    value = guarded_exp(log_value, cap)
    return value, (value == 0.0 and log_value != NEG_INF)


def logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def logsumexp(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return NEG_INF
    top = np.max(values)
    if top == NEG_INF:
        return NEG_INF
    return float(top + np.log(np.sum(np.exp(values - top))))


def log1pexp(x):
    """Stable ``log(1 + exp(x))`` for scalars or arrays."""
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0, x + np.log1p(np.exp(-np.abs(x))), np.log1p(np.exp(np.minimum(x, 0.0))))
    return out if out.ndim else float(out)


def logistic(x):
    """``1/(1+exp(-x))`` without overflow."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def two_sum(a, b):
    """Error-free transformation: ``a + b = s + err`` exactly."""
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err
