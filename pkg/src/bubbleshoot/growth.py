"""Nonlinearities ``f = exp(g)`` with generalized exponential growth.

Four named families are provided::

    power-exp      g(t) = t**p
    power-exp-log  g(t) = t**p * log(t)**l
    multi-exp      g(t) = exp_{k-1}(t**m * log(t)**l)   (f = exp_k of the inner function)
    pure-exp       g(t) = t                              (Gelfand; validation only)

Everything that can overflow is kept in log form.  ``g``, ``g'`` and ``g''``
are hand-differentiated closed forms.  Below ``t_ext`` (where the closed form
stops being usable, e.g. ``log t <= 0``) ``g`` is continued by its second
order Taylor polynomial so the shooting solver can integrate down to ``u = 0``.
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PrecisionError, SpecSyntaxError
from .logmath import DEFAULT_CAP, NEG_INF, logaddexp

FAMILIES = ("power-exp", "power-exp-log", "multi-exp", "pure-exp")

# kernel family codes, shared with the compiled and pure-Python integrators
CODE_PURE_EXP = 0
CODE_POWER_EXP = 1
CODE_POWER_EXP_LOG = 2
CODE_MULTI_EXP = 3

_ALLOWED_KEYS = {
    "power-exp": {"p", "t0"},
    "power-exp-log": {"p", "l", "t0"},
    "multi-exp": {"k", "m", "l", "t0"},
    "pure-exp": {"t0"},
}


# ---------------------------------------------------------------------------
# t**p * log(t)**l and its derivatives (shared by two families)


def _powlog(t, p, l):
    t = np.asarray(t, dtype=float)
    if l == 0:
        return t**p
    return t**p * np.log(t) ** l


def _powlog_d1(t, p, l):
    t = np.asarray(t, dtype=float)
    if l == 0:
        return p * t ** (p - 1)
    L = np.log(t)
    return t ** (p - 1) * L ** (l - 1) * (p * L + l)


def _powlog_d2(t, p, l):
    t = np.asarray(t, dtype=float)
    if l == 0:
        # p < 2 gives g'' = inf at 0; callers handle it
        with np.errstate(divide="ignore", invalid="ignore"):
            return p * (p - 1) * t ** (p - 2)
    L = np.log(t)
    poly = p * (p - 1) * L**2 + l * (2 * p - 1) * L + l * (l - 1)
    return t ** (p - 2) * L ** (l - 2) * poly


def _powlog_diff(t, s, p, l):
    """``h(t+s) - h(t)`` for ``h = t**p log(t)**l`` without cancellation."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    x = np.log1p(s / t)
    expo = p * x
    if l != 0:
        expo = expo + l * np.log1p(x / np.log(t))
    return _powlog(t, p, l) * np.expm1(expo)


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthModel:
    """A nonlinearity family with its parameters.

    Instances are immutable and hashable, so they can be shared between
    worker threads and used as cache keys.
    """

    family: str
    p: float = math.nan
    l: float = 0.0
    k: int = 0
    m: float = 1.0
    t0: float = 0.0
    validation_only: bool = False
    cap: float = DEFAULT_CAP
    t_ext: float = field(default=0.0, compare=False)
    _ext: tuple = field(default=(0.0, 0.0, 0.0), compare=False, repr=False)

    # -- nominal exponents -------------------------------------------------

    @property
    def nominal_p(self):
        if self.family == "multi-exp":
            return math.inf
        if self.family == "pure-exp":
            return 1.0
        return float(self.p)

    @property
    def nominal_q(self):
        if self.family == "multi-exp":
            return 1.0
        if self.family == "pure-exp":
            return math.inf
        p = float(self.p)
        return math.inf if p == 1 else p / (p - 1)

    @property
    def is_limit_case(self):
        """True for q = 1 (multiple exponential growth)."""
        return self.family == "multi-exp"

    def hat_g(self, t):
        """Inner function of a multi-exp tower, ``f = exp_k(hat_g)``."""
        if self.family != "multi-exp":
            raise DomainError(f"{self.family} has no inner tower function")
        return _scalar(_powlog(t, self.m, self.l))

    def hat_g_derivs(self, t):
        return (
            _scalar(_powlog(t, self.m, self.l)),
            _scalar(_powlog_d1(t, self.m, self.l)),
            _scalar(_powlog_d2(t, self.m, self.l)),
        )

    @property
    def spec(self):
        """Canonical mini-grammar string for this model."""
        if self.family == "pure-exp":
            return "pure-exp"
        if self.family == "power-exp":
            return f"power-exp:p={self.p!r}"
        if self.family == "power-exp-log":
            return f"power-exp-log:p={self.p!r},l={self.l!r}"
        return f"multi-exp:k={self.k},m={self.m!r},l={self.l!r}"

    # -- closed forms ------------------------------------------------------

    def _closed(self, t):
        """(g, g', g'') from the closed form; valid for t >= t_ext."""
        fam = self.family
        if fam == "pure-exp":
            t = np.asarray(t, dtype=float)
            return _scalar(t), _scalar(np.ones_like(t)), _scalar(np.zeros_like(t))
        if fam in ("power-exp", "power-exp-log"):
            l = self.l if fam == "power-exp-log" else 0.0
            with np.errstate(divide="ignore", invalid="ignore"):
                return (
                    _scalar(_powlog(t, self.p, l)),
                    _scalar(_powlog_d1(t, self.p, l)),
                    _scalar(_powlog_d2(t, self.p, l)),
                )
        # multi-exp tower
        g, g1, g2 = (np.asarray(v, dtype=float) for v in self.hat_g_derivs(t))
        for stage in range(1, self.k):
            top = float(np.max(g))
            if top > self.cap:
                raise PrecisionError(
                    f"multi-exp tower stage {stage} exponent {top:.6g} exceeds cap {self.cap}",
                    log_value=top,
                    stage=stage,
                )
            with np.errstate(over="ignore"):
                e = np.exp(g)
                g, g1, g2 = e, e * g1, e * (g2 + g1 * g1)
        return _scalar(g), _scalar(g1), _scalar(g2)

    def derivs(self, t):
        """(g, g', g'') at ``t`` (scalar or array), extension included."""
        t_arr = np.asarray(t, dtype=float)
        if np.all(t_arr >= self.t_ext):
            return self._closed(t)
        ga, g1a, g2a = self._ext
        d = t_arr - self.t_ext
        lo = t_arr < self.t_ext
        safe = np.where(lo, max(self.t_ext, 1.0), t_arr)
        g, g1, g2 = (np.asarray(v, dtype=float) for v in self._closed(safe))
        g = np.where(lo, ga + g1a * d + 0.5 * g2a * d * d, g)
        g1 = np.where(lo, g1a + g2a * d, g1)
        g2 = np.where(lo, g2a, g2)
        return _scalar(g), _scalar(g1), _scalar(g2)

    def g(self, t):
        return self.derivs(t)[0]

    def log_derivs(self, t):
        """(log g, log g', log g'') for scalar ``t >= t0``.

        Multi-exp towers are handled without forming the top stage, so this
        works where ``g`` itself would overflow.  Nonpositive quantities give
        ``nan``/``-inf`` logs, which the callers treat as clause failures.
        """
        t = float(t)
        if self.family != "multi-exp":
            g, g1, g2 = self.derivs(t)
            with np.errstate(divide="ignore", invalid="ignore"):
                return float(np.log(g)), float(np.log(g1)), float(np.log(g2))
        g, g1, g2 = self.hat_g_derivs(t)
        # stage i: value v, log v', and r = v''/v'^2; next stage exp(v) has
        # log value v, log derivative v + log v', and r_next = (1 + r)/exp(v)
        v = g
        lv = math.log(v) if v > 0 else math.nan
        lv1 = math.log(g1) if g1 > 0 else math.nan
        r = g2 / (g1 * g1) if g1 != 0 else math.nan
        lr = math.log(r) if r > 0 else math.nan
        for stage in range(1, self.k):
            if not 1.0 + r > 0:
                return v, v + lv1, math.nan
            lv, lv1, lr = v, v + lv1, math.log1p(r) - v
            if stage < self.k - 1:
                if v > self.cap:
                    raise PrecisionError(
                        f"multi-exp tower stage {stage} exponent {v:.6g} exceeds cap {self.cap}",
                        log_value=v,
                        stage=stage,
                    )
                v = math.exp(v)
                r = math.exp(lr)
        return lv, lv1, 2 * lv1 + lr

    def g_diff(self, t, s):
        """``g(t+s) - g(t)`` computed without catastrophic cancellation."""
        t_arr = np.asarray(t, dtype=float)
        s_arr = np.asarray(s, dtype=float)
        fam = self.family
        both = np.all(t_arr >= self.t_ext) and np.all(t_arr + s_arr >= self.t_ext)
        if fam == "pure-exp":
            return _scalar(s_arr + 0.0 * t_arr)
        if not both or np.any(t_arr <= 0):
            return _scalar(np.asarray(self.g(t_arr + s_arr)) - np.asarray(self.g(t_arr)))
        with np.errstate(divide="ignore", invalid="ignore"):
            if fam in ("power-exp", "power-exp-log"):
                l = self.l if fam == "power-exp-log" else 0.0
                return _scalar(_powlog_diff(t_arr, s_arr, self.p, l))
            v = _powlog(t_arr, self.m, self.l)
            d = _powlog_diff(t_arr, s_arr, self.m, self.l)
            for stage in range(1, self.k):
                top = float(np.max(v))
                if top > self.cap:
                    raise PrecisionError(
                        f"multi-exp tower stage {stage} exponent {top:.6g} exceeds cap {self.cap}",
                        log_value=top,
                        stage=stage,
                    )
                w = np.exp(v)
                d = w * np.expm1(d)
                v = w
        return _scalar(d)

    def tower_stages(self, t):
        """Stages ``[(value_i, log_value_i)]`` of a multi-exp tower at ``t``.

        ``log_value_{i+1}`` is stored as ``value_i`` itself, so the round trip
        is exact by construction; the last stage is ``g(t)``.
        """
        if self.family != "multi-exp":
            raise DomainError(f"{self.family} is not a tower family")
        v = float(self.hat_g(t))
        stages = [(v, math.log(v) if v > 0 else NEG_INF)]
        for stage in range(1, self.k):
            if v > self.cap:
                raise PrecisionError(
                    f"multi-exp tower stage {stage} exponent {v:.6g} exceeds cap {self.cap}",
                    log_value=v,
                    stage=stage,
                )
            w = math.exp(v)
            stages.append((w, v))
            v = w
        return stages

    def t_max(self):
        """Largest sample point allowed by the exponent cap (power families: 1e8)."""
        if self.family != "multi-exp":
            return 1e8 * max(1.0, self.t0)

        def formable(t):
            try:
                self._closed(t)
            except PrecisionError:
                return False
            return True

        lo = max(self.t0, 1.0)
        if not formable(lo):
            return self.t0
        hi = lo
        while formable(hi * 2):
            hi *= 2
            if hi > 1e12:
                return hi
        lo, hi = hi, hi * 2
        while hi - lo > 1e-12 * hi:
            mid = 0.5 * (lo + hi)
            if formable(mid):
                lo = mid
            else:
                hi = mid
        return lo

    def kernel_args(self):
        """(family code, params[4], ext[4]) for the integration kernels."""
        code = {
            "pure-exp": CODE_PURE_EXP,
            "power-exp": CODE_POWER_EXP,
            "power-exp-log": CODE_POWER_EXP_LOG,
            "multi-exp": CODE_MULTI_EXP,
        }[self.family]
        params = np.array(
            [
                self.p if self.family in ("power-exp", "power-exp-log") else self.m,
                self.l,
                float(self.k),
                0.0,
            ],
            dtype=float,
        )
        ext = np.array([self.t_ext, *self._ext], dtype=float)
        return code, params, ext


def _with_extension(model):
    """Attach the Taylor continuation used below ``t_ext``."""
    fam = model.family
    if fam == "pure-exp":
        t_ext = -math.inf
    elif fam == "power-exp":
        t_ext = 0.0
    elif fam == "power-exp-log":
        t_ext = model.t0
    else:
        t_ext = 0.0 if (model.l == 0 and model.m >= 1) else model.t0
    object.__setattr__(model, "t_ext", t_ext)
    if math.isfinite(t_ext):
        with np.errstate(divide="ignore", invalid="ignore"):
            ga, g1a, g2a = (float(v) for v in model._closed(t_ext))
        if not math.isfinite(g1a):
            g1a = 0.0
        if not math.isfinite(g2a):
            g2a = 0.0
        object.__setattr__(model, "_ext", (ga, g1a, g2a))
    return model


def _geometric(lo, hi, n):
    return np.geomspace(lo, hi, n)


def _monotone_witness(model, t_lo, t_hi, n=400):
    """Worst sample for g' > 0 and g'' > 0 on a geometric grid."""
    ts = _geometric(max(t_lo, 1e-12), t_hi, n)
    worst = None
    for t in ts:
        lg, lg1, lg2 = model.log_derivs(t)
        if not (lg1 > NEG_INF and lg2 > NEG_INF) or math.isnan(lg1) or math.isnan(lg2):
            return False, float(t)
        if worst is None:
            worst = float(t)
    return True, worst


def make_model(family, *, validate=True, cap=DEFAULT_CAP, **params):
    """Construct a :class:`GrowthModel`.

    Parameters
    ----------
    family : str
        One of :data:`FAMILIES`.
    validate : bool
        Check ``g' > 0`` and ``g'' > 0`` on a geometric grid from ``t0``.
        ``pure-exp`` fails this check by design and is only available with
        ``validate=False`` (see :func:`gelfand`).
    **params
        ``p``, ``l``, ``k``, ``m``, ``t0`` as applicable.
    """
    if family not in FAMILIES:
        raise DomainError(f"unknown family {family!r}; expected one of {FAMILIES}")
    unknown = set(params) - _ALLOWED_KEYS[family]
    if unknown:
        raise DomainError(f"unknown parameter(s) {sorted(unknown)} for {family}")
    t0 = params.get("t0")
    if family == "pure-exp":
        if validate:
            raise DomainError("pure-exp has g'' = 0 and violates the growth hypothesis; use gelfand() for validation runs")
        model = GrowthModel("pure-exp", t0=0.0 if t0 is None else float(t0), validation_only=True, cap=cap)
        return _with_extension(model)
    if family == "power-exp":
        if "p" not in params:
            raise DomainError("power-exp requires p")
        p = float(params["p"])
        if p <= 0:
            raise DomainError("power-exp requires p > 0")
        model = GrowthModel("power-exp", p=p, t0=0.0 if t0 is None else float(t0), cap=cap)
    elif family == "power-exp-log":
        if "p" not in params:
            raise DomainError("power-exp-log requires p")
        p = float(params["p"])
        l = float(params.get("l", 0.0))
        if p <= 0:
            raise DomainError("power-exp-log requires p > 0")
        model = GrowthModel(
            "power-exp-log", p=p, l=l, t0=math.exp(1 + abs(l)) if t0 is None else float(t0), cap=cap
        )
    else:
        k = params.get("k", 2)
        if float(k) != int(k) or int(k) < 2:
            raise DomainError("multi-exp requires an integer k >= 2")
        m = float(params.get("m", 1.0))
        l = float(params.get("l", 0.0))
        if m <= 0:
            raise DomainError("multi-exp requires m > 0")
        model = GrowthModel("multi-exp", k=int(k), m=m, l=l, t0=1.0, cap=cap)
        if t0 is not None:
            model = GrowthModel("multi-exp", k=int(k), m=m, l=l, t0=float(t0), cap=cap)
        else:
            model = _choose_multi_exp_t0(model)
    model = _with_extension(model)
    if validate:
        if model.nominal_p <= 1:
            raise DomainError(f"growth exponent p={model.nominal_p} must exceed 1")
        if family == "power-exp-log":
            model = _raise_t0_until_convex(model)
        ok, witness = _monotone_witness(model, max(model.t0, 1e-3), min(model.t_max(), 1e6 * max(1, model.t0)))
        if not ok:
            raise DomainError(f"g' > 0 and g'' > 0 fail at t={witness:.6g} for {model.spec}")
    return model


def _raise_t0_until_convex(model):
    for _ in range(60):
        ok, _w = _monotone_witness(model, model.t0, 1e6 * model.t0, n=200)
        if ok:
            return model
        model = _with_extension(
            GrowthModel(model.family, p=model.p, l=model.l, t0=model.t0 * 2, cap=model.cap)
        )
    return model


def _h1_ii_ok(model, t_lo, t_hi, n=200, tol=1e-12):
    ts = _geometric(t_lo, t_hi, n)
    P = [_P(model, t) for t in ts]
    hat = [model.hat_g_derivs(t) for t in ts]
    r = [d1 / g0 if g0 > 0 else math.inf for g0, d1, _ in hat]
    ok_p = all(b >= a * (1 - tol) for a, b in zip(P, P[1:]))
    ok_r = all(b <= a * (1 + tol) for a, b in zip(r, r[1:]))
    return ok_p, ok_r, ts, P, r


def _choose_multi_exp_t0(model):
    """Smallest t0 on a doubling ladder from which the growth-hypothesis clauses hold."""
    start = math.exp(1 + abs(model.l)) if model.l != 0 else 1.0
    t0 = start
    for _ in range(40):
        cand = GrowthModel("multi-exp", k=model.k, m=model.m, l=model.l, t0=t0, cap=model.cap)
        cand = _with_extension(cand)
        try:
            t_hi = cand.t_max()
            if t_hi <= t0 * 1.0001:
                break
            ok_m, _w = _monotone_witness(cand, t0, t_hi, n=120)
            ok_p, ok_r, *_ = _h1_ii_ok(cand, t0, t_hi, n=120)
        except PrecisionError:
            break
        if ok_m and ok_p and ok_r:
            return cand
        t0 *= 2
    raise DomainError(f"no admissible t0 found for {model.spec}")


def gelfand(cap=DEFAULT_CAP):
    """The pure exponential ``f = e^t`` (validation family, exempt from the growth hypothesis)."""
    return make_model("pure-exp", validate=False, cap=cap)


# ---------------------------------------------------------------------------
# model spec mini-grammar: family:key=value,key=value

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_-]*")
_KEY = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")


def parse_spec(text):
    """Split ``ident[:key=decimal,...]`` into ``(ident, {key: float})``."""
    m = _IDENT.match(text)
    if not m:
        raise SpecSyntaxError("expected an identifier", text, 0)
    name = m.group(0)
    pos = m.end()
    values = {}
    if pos == len(text):
        return name, values
    if text[pos] != ":":
        raise SpecSyntaxError("expected ':'", text, pos)
    pos += 1
    while True:
        start = pos
        km = _KEY.match(text, pos)
        if not km:
            raise SpecSyntaxError("expected key=value", text, start)
        pos = km.end()
        if pos >= len(text) or text[pos] != "=":
            raise SpecSyntaxError("expected '='", text, start)
        pos += 1
        nm = _NUMBER.match(text, pos)
        if not nm or (nm.end() < len(text) and text[nm.end()] != ","):
            raise SpecSyntaxError("expected a decimal value", text, start)
        key = km.group(0)
        if key in values:
            raise SpecSyntaxError(f"duplicate key {key!r}", text, start)
        values[key] = float(nm.group(0))
        pos = nm.end()
        if pos == len(text):
            return name, values
        pos += 1  # the comma


def parse_model(text, *, validate=True, cap=DEFAULT_CAP):
    """Build a model from e.g. ``power-exp:p=3`` or ``multi-exp:k=2,m=1,l=0``."""
    family, values = parse_spec(text)
    if family not in FAMILIES:
        raise SpecSyntaxError(f"unknown family {family!r}", text, 0)
    unknown = set(values) - _ALLOWED_KEYS[family]
    if unknown:
        key = sorted(unknown)[0]
        raise SpecSyntaxError(f"unknown key {key!r} for {family}", text, text.index(key + "="))
    if family == "pure-exp":
        return make_model("pure-exp", validate=False, cap=cap, **values)
    if "k" in values:
        values["k"] = int(values["k"]) if values["k"] == int(values["k"]) else values["k"]
    return make_model(family, validate=validate, cap=cap, **values)


# ---------------------------------------------------------------------------
# weights h(|x|)


@dataclass(frozen=True)
class Weight:
    """Radial coefficient ``h(r) = sum_i coeffs[i] r**i`` on [0, 1]."""

    coeffs: tuple = (1.0,)

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        object.__setattr__(self, "coeffs", c if c else (1.0,))
        r = np.linspace(0.0, 1.0, 1001)
        if np.any(self.h(r) <= 0):
            raise DomainError(f"weight {self.coeffs} is not positive on [0, 1]")

    @property
    def is_constant(self):
        return all(c == 0 for c in self.coeffs[1:])

    @property
    def h0(self):
        return self.coeffs[0]

    def h(self, r):
        return _scalar(np.polynomial.polynomial.polyval(np.asarray(r, dtype=float), self.coeffs))

    def h_prime(self, r):
        d = np.polynomial.polynomial.polyder(self.coeffs) if len(self.coeffs) > 1 else [0.0]
        return _scalar(np.polynomial.polynomial.polyval(np.asarray(r, dtype=float), d))

    def h_second(self, r):
        d = np.polynomial.polynomial.polyder(self.coeffs, 2) if len(self.coeffs) > 2 else [0.0]
        return _scalar(np.polynomial.polynomial.polyval(np.asarray(r, dtype=float), d))

    def log_h(self, r):
        return _scalar(np.log(self.h(r)))

    @property
    def spec(self):
        if self.is_constant:
            return "const" if self.h0 == 1.0 else f"const:c={self.h0!r}"
        return "poly:" + ",".join(f"c{i}={c!r}" for i, c in enumerate(self.coeffs) if c != 0)


def parse_weight(text):
    """``const``, ``const:c=2`` or ``poly:c0=1,c2=0.5``."""
    name, values = parse_spec(text)
    if name == "const":
        unknown = set(values) - {"c"}
        if unknown:
            key = sorted(unknown)[0]
            raise SpecSyntaxError(f"unknown key {key!r} for const", text, text.index(key + "="))
        return Weight((values.get("c", 1.0),))
    if name == "poly":
        coeffs = {}
        for key, val in values.items():
            if not re.fullmatch(r"c\d+", key):
                raise SpecSyntaxError(f"unknown key {key!r} for poly", text, text.index(key + "="))
            coeffs[int(key[1:])] = val
        n = max(coeffs) + 1 if coeffs else 1
        return Weight(tuple(coeffs.get(i, 0.0) for i in range(n)))
    raise SpecSyntaxError(f"unknown weight {name!r}", text, 0)


# ---------------------------------------------------------------------------
# operations


def evaluate(model, t):
    """Return ``(g, g', g'')`` at ``t >= t0``."""
    if t < model.t0:
        raise DomainError(f"t={t!r} is below t0={model.t0!r} for {model.spec}")
    g, g1, g2 = model.derivs(float(t))
    return float(g), float(g1), float(g2)


def _Q(model, t):
    lg, lg1, lg2 = model.log_derivs(t)
    return math.exp(2 * lg1 - lg - lg2)


def _P(model, t):
    lg, lg1, _ = model.log_derivs(t)
    return math.exp(math.log(t) + lg1 - lg)


def q_p_estimate(model, t_grid):
    """Tabulate ``Q = g'^2/(g g'')`` and ``P = t g'/g`` along ``t_grid``.

    Returns
    -------
    dict
        ``rows``: list of ``(t, Q, P)``; ``last_q``/``last_p``; ``drift_q``/``drift_p``:
        max deviation from the last value over the last doubling of the grid.
    """
    t_grid = [float(t) for t in t_grid]
    if any(t < model.t0 for t in t_grid):
        raise DomainError("t_grid reaches below t0")
    rows = [(t, _Q(model, t), _P(model, t)) for t in t_grid]
    t_last, q_last, p_last = rows[-1]
    tail = [r for r in rows if r[0] >= t_last / 2]
    return {
        "rows": rows,
        "last_q": q_last,
        "last_p": p_last,
        "drift_q": max(abs(r[1] - q_last) for r in tail),
        "drift_p": max(abs(r[2] - p_last) for r in tail),
    }


def doubling_grid(model, start=None, count=None):
    """``t0 * 2**j`` (or ``start * 2**j``) up to ``model.t_max()``."""
    t = float(start if start is not None else max(model.t0, 1.0))
    t_hi = model.t_max()
    out = []
    while t <= t_hi and (count is None or len(out) < count):
        out.append(t)
        t *= 2
    return out


def check_H1(model, tol=1e-9, limit_tol=0.05):
    """Numerically test the clauses of the growth hypothesis.

    Every clause maps to ``{"ok": bool, "witness": (t, value) | None}``; the
    witness is the worst sample seen.  No exception is raised for failures.
    """
    t_lo = max(model.t0, 1e-3) if model.t0 > 0 else 1.0
    t_hi = min(model.t_max(), 1e7 * max(model.t0, 1.0))
    report = {}

    ts = _geometric(t_lo, t_hi, 300)
    worst = None
    ok = True
    for t in ts:
        g, g1, g2 = model.log_derivs(t)
        bad = not (math.isfinite(g1) and math.isfinite(g2))
        if bad:
            ok = False
            worst = (float(t), (g1, g2))
            break
    report["monotonicity"] = {"ok": ok, "witness": worst}

    p_nom = model.nominal_p
    report["range"] = {"ok": p_nom > 1, "witness": (None, p_nom)}

    ladder = []
    t = t_lo
    while t <= t_hi:
        ladder.append(t)
        t *= 2
    if len(ladder) < 3:
        ladder = list(_geometric(t_lo, t_hi, 4))
    Q = [_Q(model, t) for t in ladder]
    P = [_P(model, t) for t in ladder]
    q_nom = model.nominal_q

    def _drift_ok(vals, target):
        gaps = [abs(v - target) for v in vals]
        worst_i = max(range(1, len(gaps)), key=lambda i: gaps[i] - gaps[i - 1])
        mono = all(gaps[i] <= gaps[i - 1] + tol for i in range(1, len(gaps)))
        return mono, (ladder[worst_i], vals[worst_i]), gaps[-1]

    if math.isfinite(q_nom):
        mono, w, gap = _drift_ok(Q, q_nom)
        report["q_limit"] = {"ok": bool(mono and gap <= limit_tol), "witness": w}
    else:
        report["q_limit"] = {"ok": False, "witness": (ladder[-1], Q[-1])}
    if math.isfinite(p_nom):
        mono, w, gap = _drift_ok(P, p_nom)
        report["p_limit"] = {"ok": bool(mono and gap <= limit_tol * max(1, p_nom)), "witness": w}
    else:
        grows = all(b >= a - tol for a, b in zip(P, P[1:])) and P[-1] > 1 / limit_tol
        report["p_limit"] = {"ok": bool(grows), "witness": (ladder[-1], P[-1])}
    conj = 1 / P[-1] + 1 / Q[-1]
    report["conjugacy"] = {"ok": abs(conj - 1) <= limit_tol, "witness": (ladder[-1], conj)}

    if model.is_limit_case:
        ok_p, ok_r, tt, Pv, rv = _h1_ii_ok(model, t_lo, t_hi, tol=tol)
        report["ii"] = {
            "ok": bool(ok_p and ok_r),
            "tg_over_g_nondecreasing": ok_p,
            "hat_ratio_nonincreasing": ok_r,
            "witness": (float(tt[-1]), rv[-1]),
        }
    else:
        report["ii"] = {"ok": True, "vacuous": True, "witness": None}
    report["ok"] = all(v["ok"] for v in report.values() if isinstance(v, dict))
    return report


# ---------------------------------------------------------------------------
# antiderivative F(t) = int_0^t f(s) ds, kept as log F

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _panel_log_integral(model, t_ref, a, b, log_weight=None):
    """log of int exp(g(t_ref + u) - g(t_ref)) du over offsets ``a < u < b``.

    ``log_weight(s)``, if given, multiplies the integrand by ``exp`` of it.
    """
    half = 0.5 * (b - a)
    if half <= 0:
        return NEG_INF
    u = 0.5 * (a + b) + half * _GL_X
    e = np.asarray(model.g_diff(t_ref, u), dtype=float)
    if log_weight is not None:
        e = e + np.array([log_weight(t_ref + x) for x in u])
    top = float(np.max(e))
    if top == NEG_INF:
        return NEG_INF
    return top + math.log(float(np.dot(_GL_W, np.exp(e - top))) * half)


def _log_integral_between(model, t_ref, lo, hi, drop=2.0, cutoff=45.0, log_weight=None):
    """log of int_lo^hi exp(g(s) - g(t_ref)) ds.

    Panels are laid out backward from ``hi`` so that g falls by roughly
    ``drop`` across each one; the walk ends once the integrand sits
    ``cutoff`` below the running total. Panel ends are kept as offsets
    from ``t_ref`` so widths far below the spacing of doubles near
    ``t_ref`` still resolve.
    """
    acc = NEG_INF
    lo_off = lo - t_ref
    b = hi - t_ref
    e_b = float(model.g_diff(t_ref, b)) if b != 0 else 0.0
    # g may be non-smooth at s = 0 (t**1.5), so panels near it halve toward lo
    graded = 0.0 <= lo <= hi - lo
    floor = 1e-9 * max(1.0, abs(hi))
    for _ in range(100000):
        if b <= lo_off:
            break
        g1 = float(model.derivs(t_ref + b)[1])
        width = b - lo_off
        if g1 > 0 and math.isfinite(g1):
            width = min(width, drop / g1)
        if graded and b - lo_off > floor:
            width = min(width, 0.5 * (b - lo_off))
        while True:
            a = max(lo_off, b - width)
            e_a = float(model.g_diff(t_ref, a))
            if e_b - e_a <= 2 * drop or width <= 1e-300:
                break
            width *= 0.5
        acc = logaddexp(acc, _panel_log_integral(model, t_ref, a, b, log_weight))
        b, e_b = a, e_a
        if b > lo_off and e_b + math.log(b - lo_off) < acc - cutoff:
            break
    return acc


def _log_integral_from_zero(model, t):
    """log of int_0^t exp(g(s) - g(t)) ds."""
    return _log_integral_between(model, t, 0.0, t)


@functools.lru_cache(maxsize=65536)
def _log_F_cached(model, t):
    if model.family == "pure-exp":
        return math.log(math.expm1(t)) if t < 700 else t + math.log1p(-math.exp(-t))
    lg = float(model.g(t))
    return lg + _log_integral_from_zero(model, t)


def log_antiderivative(model, t):
    """``log F(t)`` with ``F(t) = int_0^t f``; ``-inf`` at ``t = 0``.

    Values are cached per (model, t); the cache is an ``lru_cache`` and safe
    for concurrent readers.
    """
    t = float(t)
    if t < 0:
        raise DomainError(f"F is defined for t >= 0, got {t!r}")
    if t == 0:
        return NEG_INF
    out = _log_F_cached(model, t)
    if not math.isfinite(out):
        raise PrecisionError(f"log F({t!r}) is not representable", log_value=out)
    return out


antiderivative_F = log_antiderivative


def log_antiderivative_many(model, ts):
    """``log F`` at many points, sharing work by cumulative integration."""
    ts = np.asarray(ts, dtype=float)
    out = np.full(ts.shape, NEG_INF)
    order = np.argsort(ts, kind="stable")
    prev_t = 0.0
    prev = NEG_INF
    for idx in order:
        t = float(ts[idx])
        if t < 0:
            raise DomainError(f"F is defined for t >= 0, got {t!r}")
        if t == 0:
            out[idx] = NEG_INF
            continue
        if t == prev_t:
            out[idx] = prev
            continue
        if model.family == "pure-exp":
            cur = _log_F_cached(model, t)
        elif prev == NEG_INF:
            cur = _log_F_cached(model, t)
        else:
            lg = float(model.g(t))
            inc = _log_integral_between(model, t, prev_t, t)
            cur = logaddexp(prev - lg, inc) + lg
        out[idx] = cur
        prev, prev_t = cur, t
    return out


# ---------------------------------------------------------------------------
# growth lemmas as residual tables


def lemma_g1_residual(model, t, M=3.0, n=201):
    """``max_{|y|<=M} |g(t + y/g'(t)) - g(t) - y|``."""
    g1 = float(model.derivs(t)[1])
    y = np.linspace(-M, M, n)
    d = np.asarray(model.g_diff(t, y / g1), dtype=float)
    return float(np.max(np.abs(d - y)))


def lemma_g3_residual(model, t, xs):
    """``max_x |g(x t)/g(t) - x**p|`` (q > 1)."""
    lg = model.log_derivs(t)[0]
    p = model.nominal_p
    res = 0.0
    for x in xs:
        ratio = math.exp(model.log_derivs(x * t)[0] - lg) if x > 0 else 0.0
        res = max(res, abs(ratio - x**p))
    return res


def lemma_g4_residual(model, t, xs):
    """``max_x |g(t - x g/g')/g(t) - exp(-x)|`` (q = 1)."""
    lg, lg1, _ = model.log_derivs(t)
    step = math.exp(lg - lg1)
    res = 0.0
    for x in xs:
        ratio = math.exp(model.log_derivs(t - x * step)[0] - lg)
        res = max(res, abs(ratio - math.exp(-x)))
    return res


def lemma_ku_derivative(model, t):
    """Derivative of ``K(t) = F log F / f``; its limsup is at most ``1/p``.

    Uses ``K' = 1 - log F * (F g'/f - 1)``; the small factor comes from
    integrating by parts from ``s0 = max(t/2, t0)``,

        F g'/f - 1 = (g'/f) [F(s0) - f(s0)/g'(s0) + int_{s0}^t f g''/g'^2],

    so no difference of nearly equal numbers is formed.
    """
    t = float(t)
    s0 = max(0.5 * t, model.t0)
    if not s0 < t:
        raise DomainError(f"ku needs t > t0, got {t!r}")
    lg1_t = model.log_derivs(t)[1]
    lg1_0 = model.log_derivs(s0)[1]

    def log_kappa(s):
        _, l1, l2 = model.log_derivs(s)
        return l2 - 2 * l1

    inner = _log_integral_between(model, t, s0, t, log_weight=log_kappa)
    # boundary part is exponentially small once g(t) - g(s0) is large
    edge = math.exp(_log_integral_from_zero(model, s0)) - math.exp(-lg1_0)
    fall = float(model.g_diff(t, s0 - t))
    excess = math.exp(lg1_t + inner) + edge * math.exp(lg1_t + fall)
    return 1.0 - log_antiderivative(model, t) * excess


def verify_growth_lemmas(model, t_list, y_range=3.0, x_range=(0.25, 0.5, 0.75)):
    """Residual table for the growth lemmas along ``t_list``.

    Columns: ``g1`` (limit-equation residual), ``g3`` (power ratio, q > 1),
    ``g4`` (exponential ratio, q = 1), ``ku`` (discrete derivative of
    ``F log F / f``) and ``ku_bound`` (= 1/p, 0 for p = inf).
    """
    t_list = [float(t) for t in t_list]
    if any(b <= a for a, b in zip(t_list, t_list[1:])):
        raise DomainError("t_list must be increasing")
    p = model.nominal_p
    rows = []
    for t in t_list:
        row = {"t": t, "g1": lemma_g1_residual(model, t, M=y_range)}
        row["g3"] = lemma_g3_residual(model, t, x_range) if not model.is_limit_case else math.nan
        row["g4"] = lemma_g4_residual(model, t, x_range) if model.is_limit_case else math.nan
        row["ku"] = lemma_ku_derivative(model, t)
        row["ku_bound"] = 0.0 if math.isinf(p) else 1.0 / p
        rows.append(row)
    return rows


def residuals_decreasing(values, floor=1e-12):
    """Strict decrease, treating values at the rounding floor as settled."""
    vals = [v for v in values]
    for a, b in zip(vals, vals[1:]):
        if b <= floor and a <= max(floor, b) + floor:
            continue
        if not b < a:
            return False
    return True


# families shipped with the package and the t-ladders their lemma tables use
SHIPPED_FAMILIES = (
    ("power-exp", {"p": 3.0}, 400.0),
    ("power-exp", {"p": 1.5}, 3200.0),
    ("power-exp-log", {"p": 2.0, "l": 1.0}, 1e6),
    ("multi-exp", {"k": 2, "m": 1.0}, 64.0),
    ("multi-exp", {"k": 2, "m": 2.0}, 25.0),
    ("multi-exp", {"k": 3, "m": 1.0}, 6.0),
)


def growth_suite(families=SHIPPED_FAMILIES, doublings=5, ku_tol=0.02):
    """Lemma tables on a t-doubling ladder for each family.

    A family passes when every residual column decreases along the ladder
    (see :func:`residuals_decreasing`) and ``|ku - 1/p| <= ku_tol`` at the
    largest t.  Returns a list of dicts with the spec, rows and verdicts.
    """
    out = []
    for family, params, t_end in families:
        model = make_model(family, **params)
        ts = [t_end / 2**j for j in range(doublings, -1, -1)]
        ts = [t for t in ts if t > model.t0]
        rows = verify_growth_lemmas(model, ts)
        columns = {}
        for key in ("g1", "g3", "g4"):
            vals = [r[key] for r in rows]
            if all(math.isfinite(v) for v in vals):
                columns[key] = residuals_decreasing(vals)
        last = rows[-1]
        ku_ok = abs(last["ku"] - last["ku_bound"]) <= ku_tol
        out.append({
            "model": model.spec,
            "rows": rows,
            "decreasing": columns,
            "ku": last["ku"],
            "ku_bound": last["ku_bound"],
            "ku_ok": ku_ok,
            "ok": all(columns.values()) and ku_ok,
        })
    return out
