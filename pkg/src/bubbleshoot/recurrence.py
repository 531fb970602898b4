"""Energy recurrence tables (a_k, delta_k, eta_k, eta~_k).

For a growth pair (q, p) with q in (1, 2) every step solves

    (2p / (2 + a)) (1 - x) - 1 + x**p = 0,    a_next = 2 - x**(p-1) (2 + a),

for the height ratio ``x = delta_{k+1}/delta_k`` in (0, 1); in the limit
case q = 1 the step is

    (2 / (2 + a)) log(1/y) - 1 + y = 0,       a_next = 2 - y (2 + a),

with ``y = eta_{k+1}/eta_k``.  Both equations also vanish at the trivial
root 1, which is excluded by the bracket scan.

Roots are located in the variable ``w = -log(ratio)`` so that ratios close
to 1 (large p, or small a) keep full relative precision in the derived
powers ``ratio**p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BracketError, BubbleShootError, DomainError

SCAN_POINTS = 2000
# scan range in w = -log(ratio); the root sits near w ~ 1/p for large p
SCAN_W_LO = 1e-300
SCAN_W_HI = 60.0


def _exponent_from_q(q):
    q = float(q)
    if not (1.0 <= q < 2.0):
        raise DomainError(f"q must lie in [1, 2), got {q!r}")
    if q == 1.0:
        return math.inf
    return q / (q - 1.0)


def _check_a(a):
    a = float(a)
    if not (0.0 < a <= 2.0):
        raise DomainError(f"a must lie in (0, 2], got {a!r}")
    return a


def _residual_fn(a, p):
    """The step equation as a function of w = -log(ratio), and in x form."""
    if math.isinf(p):
        c = 2.0 / (2.0 + a)

        def in_w(w):
            return c * w + math.expm1(-w)

        def in_w_vec(w):
            return c * w + np.expm1(-w)

        def in_x(x):
            return c * -np.log(x) - 1.0 + x

    else:
        c = 2.0 * p / (2.0 + a)

        def in_w(w):
            return -c * math.expm1(-w) + math.expm1(-p * w)

        def in_w_vec(w):
            return -c * np.expm1(-w) + np.expm1(-p * w)

        def in_x(x):
            return c * (1.0 - x) + np.expm1(p * np.log(x))

    return in_w, in_w_vec, in_x


def _solve_log_ratio(a, p):
    """Return ``w = -log x`` for the unique nontrivial root ``x`` in (0, 1)."""
    in_w, in_w_vec, _ = _residual_fn(a, p)
    ws = np.geomspace(SCAN_W_LO, SCAN_W_HI, SCAN_POINTS)
    with np.errstate(over="ignore", under="ignore"):
        vals = in_w_vec(ws)
    signs = np.sign(vals)
    flips = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    if len(flips) != 1 or np.any(signs == 0):
        raise BracketError(
            f"expected one sign change on the scan, found {len(flips)} (a={a!r}, p={p!r})"
        )
    i = int(flips[0])
    w_lo, w_hi = float(ws[i]), float(ws[i + 1])
    f_lo = in_w(w_lo)
    while True:
        mid = 0.5 * (w_lo + w_hi)
        if mid <= w_lo or mid >= w_hi:
            break
        f_mid = in_w(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            w_lo, f_lo = mid, f_mid
        else:
            w_hi = mid
    return 0.5 * (w_lo + w_hi)


def _next_a(a, p, w):
    power = -w if math.isinf(p) else -(p - 1.0) * w
    a_next = 2.0 - math.exp(power) * (2.0 + a)
    if not (0.0 < a_next < a):
        raise BubbleShootError(f"recurrence step left (0, a): a={a!r}, a_next={a_next!r}")
    return a_next


def step_supercritical(a_k, p):
    """One supercritical step: returns ``(x, a_next)`` with ``x = delta_{k+1}/delta_k``."""
    a = _check_a(a_k)
    p = float(p)
    if not (p > 2.0 and math.isfinite(p)):
        raise DomainError(f"supercritical step needs finite p > 2, got {p!r}")
    w = _solve_log_ratio(a, p)
    return math.exp(-w), _next_a(a, p, w)


def step_limit(a_k):
    """One limit-case (q = 1) step: returns ``(y, a_next)`` with ``y = eta_{k+1}/eta_k``."""
    a = _check_a(a_k)
    w = _solve_log_ratio(a, math.inf)
    return math.exp(-w), _next_a(a, math.inf, w)


def step_residual(a_k, p, ratio):
    """Value of the step equation at ``ratio`` (``p = inf`` for the limit case)."""
    _, _, in_x = _residual_fn(float(a_k), float(p))
    return float(in_x(np.float64(ratio)))


@dataclass(frozen=True)
class RecurrenceTable:
    """Sequences for one q; index 0 holds k = 1.

    ``limit`` marks q = 1, where p is infinite and the height ratios are
    carried by eta rather than delta.  Logs are kept alongside the values
    since eta underflows for deep tables.
    """

    q: float
    p: float
    k_max: int
    a: tuple
    log_delta: tuple
    log_eta: tuple
    log_eta_tilde: tuple

    @property
    def limit(self):
        return math.isinf(self.p)

    @property
    def delta(self):
        return tuple(math.exp(v) for v in self.log_delta)

    @property
    def eta(self):
        return tuple(math.exp(v) for v in self.log_eta)

    @property
    def eta_tilde(self):
        return tuple(math.exp(v) for v in self.log_eta_tilde)

    def rows(self):
        """``(k, a_k, delta_k, eta_k, eta_tilde_k)`` with k starting at 1."""
        return [
            (k + 1, self.a[k], d, e, et)
            for k, (d, e, et) in enumerate(zip(self.delta, self.eta, self.eta_tilde))
        ]

    def partial_sums(self):
        return np.cumsum(self.a)


def build_table(q, k_max):
    """Run the recurrence from ``a_1 = 2, delta_1 = eta_1 = 1`` up to ``k_max``."""
    p = _exponent_from_q(q)
    k_max = int(k_max)
    if k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max!r}")
    a = [2.0]
    sum_w = [0.0]
    for _ in range(k_max - 1):
        w = _solve_log_ratio(a[-1], p)
        a.append(_next_a(a[-1], p, w))
        sum_w.append(sum_w[-1] + w)
    if math.isinf(p):
        log_delta = tuple(0.0 for _ in sum_w)
        log_eta = tuple(-s for s in sum_w)
        log_eta_tilde = log_eta
    else:
        log_delta = tuple(-s for s in sum_w)
        log_eta = tuple(-p * s for s in sum_w)
        log_eta_tilde = tuple(-(p - 1.0) * s for s in sum_w)
    return RecurrenceTable(float(q), p, k_max, tuple(a), log_delta, log_eta, log_eta_tilde)


def lemma_b3_residuals(table):
    """Per-k values of ``eta~_k sum_{i<=k} 2 a_i / eta~_i - (2 + a_k)``."""
    out = []
    lt = table.log_eta_tilde
    for k in range(table.k_max):
        total = math.fsum(2.0 * table.a[i] * math.exp(lt[k] - lt[i]) for i in range(k + 1))
        out.append(total - (2.0 + table.a[k]))
    return out


def check_lemma_b3(table):
    """Largest absolute weighted-sum identity residual over the table."""
    return max(abs(v) for v in lemma_b3_residuals(table))


def limit_continuity(q_list, k):
    """Compare the k-th entries for q in ``q_list`` against q = 1.

    Returns ``(rows, summary)``; each row holds q, a_k, delta_k, eta_k and the
    gaps ``|a_k(q) - a_k(1)|`` and ``|eta_k(q) - eta_k(1)|``.  The summary
    records whether both gaps shrink along the list.
    """
    k = int(k)
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k!r}")
    q_list = [float(q) for q in q_list]
    if any(not (1.0 < q < 2.0) for q in q_list):
        raise DomainError("q_list entries must lie in (1, 2)")
    ref = build_table(1.0, k)
    a_ref, eta_ref = ref.a[-1], ref.eta[-1]
    rows = []
    for q in q_list:
        tab = build_table(q, k)
        rows.append(
            {
                "q": q,
                "a_k": tab.a[-1],
                "delta_k": tab.delta[-1],
                "eta_k": tab.eta[-1],
                "gap_a": abs(tab.a[-1] - a_ref),
                "gap_eta": abs(tab.eta[-1] - eta_ref),
            }
        )

    def shrinking(key):
        vals = [r[key] for r in rows]
        return all(b < a or b == 0.0 for a, b in zip(vals, vals[1:]))

    summary = {
        "a_ref": a_ref,
        "eta_ref": eta_ref,
        "a_gap_decreasing": shrinking("gap_a"),
        "eta_gap_decreasing": shrinking("gap_eta"),
    }
    return rows, summary


def divergence_proxy(table, threshold=20.0):
    """``(sum of a_k, sum > threshold)``; a stand-in for unbounded partial sums."""
    total = math.fsum(table.a)
    return total, total > threshold
