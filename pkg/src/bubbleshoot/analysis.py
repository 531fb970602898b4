"""Scaling and energy functions along a solution, bubble detection, trends.

With ``t = log(1/r)`` the scaling function ``phi = lambda r^2 h f'(u)`` and
the energy function ``psi = g'(u) m`` obey

    d log(phi)/dt = psi (1 + g''/g'^2) - 2 - r h'/h,

so interior maxima of phi are sign changes of the right-hand side; they
are located on a cubic Hermite reconstruction of (u, m) between samples
(``u_t = m``, ``m_t = -w`` are both known at every sample).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError
from .profiles import eval_profile, tower_profile, z_of_log_r
from .solver import hermite_trapezoid

DEFAULT_PEAK_FLOOR = 1e-3


# ---------------------------------------------------------------------------
# reconstruction along the grid


class _Track:
    """Ascending-t view of a solution with Hermite interpolation."""

    def __init__(self, sol):
        self.sol = sol
        self.model = sol.model
        self.weight = sol.weight
        self.t = sol.t[::-1].copy()
        self.u = sol.u[::-1].copy()
        self.m = sol.m[::-1].copy()
        self.w = self._w(self.t, self.u)

    def _w(self, t, u):
        r = np.exp(-np.asarray(t, dtype=float))
        g = np.asarray(self.model.g(u), dtype=float)
        return np.exp(self.sol.log_lambda + g + np.log(self.weight.h(r)) - 2.0 * np.asarray(t))

    def state(self, t):
        """``(u, m)`` at any ``t`` inside the grid."""
        t = float(t)
        i = int(np.searchsorted(self.t, t, side="right")) - 1
        i = min(max(i, 0), len(self.t) - 2)
        t0, t1 = self.t[i], self.t[i + 1]
        h = t1 - t0
        s = (t - t0) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        u = h00 * self.u[i] + h10 * h * self.m[i] + h01 * self.u[i + 1] + h11 * h * self.m[i + 1]
        m = h00 * self.m[i] - h10 * h * self.w[i] + h01 * self.m[i + 1] - h11 * h * self.w[i + 1]
        return float(u), float(m)

    def dlogphi(self, t, u, m):
        """``d log(phi)/dt`` at given states (vectorized)."""
        t = np.asarray(t, dtype=float)
        r = np.exp(-t)
        _, g1, g2 = (np.asarray(v, dtype=float) for v in self.model.derivs(u))
        with np.errstate(divide="ignore", invalid="ignore"):
            return m * (g1 + g2 / g1) - 2.0 - r * self.weight.h_prime(r) / self.weight.h(r)

    def dlogphi_at(self, t):
        u, m = self.state(t)
        return float(self.dlogphi(t, u, m))

    def integral(self, ta, tb, integrand):
        """``int_ta^tb v dt`` for ``integrand(t, u, m) -> (v, dv)``."""
        if not tb > ta:
            return 0.0
        inner = (self.t > ta) & (self.t < tb)
        ua, ma = self.state(ta)
        ub, mb = self.state(tb)
        t = np.concatenate(([ta], self.t[inner], [tb]))
        u = np.concatenate(([ua], self.u[inner], [ub]))
        m = np.concatenate(([ma], self.m[inner], [mb]))
        v, dv = integrand(t, u, m)
        return float(hermite_trapezoid(t, v, dv)[-1])

    def fprime_integrand(self, t, u, m):
        """``lambda h f'(u) r^2`` and its t-derivative."""
        r = np.exp(-t)
        _, g1, g2 = (np.asarray(v, dtype=float) for v in self.model.derivs(u))
        w = self._w(t, u)
        dlogh = -r * self.weight.h_prime(r) / self.weight.h(r)
        dw = w * (g1 * m - 2.0 + dlogh)
        return w * g1, dw * g1 + w * g2 * m


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True, eq=False)
class ScalingDiagnostics:
    """phi and psi on the solution grid (same order as the solution).

    Samples with ``u < t0`` or ``g'(u) <= 0`` are marked invalid and carry
    ``nan``.
    """

    t: np.ndarray
    log_phi: np.ndarray
    psi: np.ndarray
    dlogphi: np.ndarray
    valid: np.ndarray

    @property
    def phi(self):
        return np.exp(self.log_phi)

    @property
    def r(self):
        return np.exp(-self.t)


def compute_diagnostics(solution, model=None, weight=None):
    """Sample ``phi``, ``psi`` and ``d log phi / dt`` along ``solution``."""
    model = model or solution.model
    weight = weight or solution.weight
    t, u, m = solution.t, solution.u, solution.m
    r = np.exp(-t)
    g, g1, g2 = (np.asarray(v, dtype=float) for v in model.derivs(u))
    valid = (u >= model.t0) & (g1 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_phi = solution.log_lambda + np.log(weight.h(r)) - 2.0 * t + g + np.log(g1)
        psi = g1 * m
        d = m * (g1 + g2 / g1) - 2.0 - r * weight.h_prime(r) / weight.h(r)
    nan = np.full_like(t, np.nan)
    return ScalingDiagnostics(
        t=t,
        log_phi=np.where(valid, log_phi, nan),
        psi=np.where(valid, psi, nan),
        dlogphi=np.where(valid, d, nan),
        valid=valid,
    )


def lemma_d1_check(solution, diag=None):
    """Per-sample check of ``r phi'/phi = 2 - psi (1 + eps)`` on valid samples.

    Returns ``(max_violation, n_checked)`` where the violation is
    ``max(0, |eps| - bound)`` with ``bound = 2 g''/g'^2 + |r h'/h|/psi``
    and ``eps`` computed from a central difference of log phi in log r.
    """
    diag = diag or compute_diagnostics(solution)
    model, weight = solution.model, solution.weight
    t = diag.t
    worst = 0.0
    count = 0
    for i in range(1, len(t) - 1):
        if not (diag.valid[i - 1] and diag.valid[i] and diag.valid[i + 1]):
            continue
        psi = diag.psi[i]
        if not psi > 0:
            continue
        # r d/dr = -d/dt
        rphi = -(diag.log_phi[i + 1] - diag.log_phi[i - 1]) / (t[i + 1] - t[i - 1])
        eps = (2.0 - rphi) / psi - 1.0
        _, g1, g2 = (float(v) for v in model.derivs(solution.u[i]))
        r = math.exp(-t[i])
        bound = 2.0 * g2 / g1**2 + abs(r * weight.h_prime(r) / weight.h(r)) / psi
        # allow for the difference quotient's own error
        h = 0.5 * (t[i - 1] - t[i + 1])
        slack = 10.0 * h * h * (1.0 + abs(rphi)) / psi
        worst = max(worst, abs(eps) - bound - slack)
        count += 1
    return max(worst, 0.0), count


# ---------------------------------------------------------------------------
# events


@dataclass
class ConcentrationEvent:
    """One detected bubble; radii in the original variable r."""

    k: int
    r_center: float
    t_center: float
    u_center: float
    phi_peak: float
    psi_at_peak: float
    gamma: float
    window: tuple
    window_t: tuple
    energy_fprime: float = math.nan
    energy_f_scaled: float = math.nan
    gap_energy_to_next: float = math.nan
    height_ratio: float = math.nan
    height_log: float = math.nan
    position_ratio: float = math.nan
    profile_mismatch: float = math.nan
    phi_shape_mismatch: float = math.nan
    boundary_peak: bool = False

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        d["window_t"] = list(self.window_t)
        d["psi"] = d.pop("psi_at_peak")
        return d


def _parse_window_rule(rule):
    if rule in (None, "phi-min"):
        return "phi-min", None
    if isinstance(rule, str) and rule.startswith("gamma-multiple:"):
        c = float(rule.split(":", 1)[1])
        if not c > 1.0:
            raise DomainError("gamma-multiple factor must exceed 1")
        return "gamma-multiple", c
    raise DomainError(f"unknown window rule {rule!r}")


def _refine_root(track, ta, tb):
    fa, fb = track.dlogphi_at(ta), track.dlogphi_at(tb)
    if not (np.isfinite(fa) and np.isfinite(fb)) or fa * fb > 0:
        return None
    if fa == 0.0:
        return ta
    if fb == 0.0:
        return tb
    return brentq(track.dlogphi_at, ta, tb, xtol=1e-13, rtol=1e-15, maxiter=200)


def find_phi_maxima(solution, diag=None, peak_floor=DEFAULT_PEAK_FLOOR):
    """``[(t, boundary_flag)]`` of local maxima of phi above ``peak_floor``.

    Interior maxima are where ``d log phi/dt`` changes from positive to
    negative as t increases; a maximum at ``r = 1`` is reported when phi is
    still increasing toward the boundary there.
    """
    diag = diag or compute_diagnostics(solution)
    track = _Track(solution)
    t = track.t
    d = diag.dlogphi[::-1]
    ok = diag.valid[::-1]
    found = []
    for i in range(len(t) - 1):
        if ok[i] and ok[i + 1] and d[i] > 0 >= d[i + 1]:
            tc = _refine_root(track, t[i], t[i + 1])
            if tc is not None:
                found.append((tc, False))
    if ok[0] and d[0] < 0:
        found.append((float(t[0]), True))
    out = []
    log_floor = math.log(peak_floor)
    for tc, edge in found:
        u, m = track.state(tc)
        if _log_phi_at(solution, tc, u) > log_floor:
            out.append((tc, edge))
    out.sort(key=lambda x: -x[0])  # center first: decreasing u
    return out


def _log_phi_at(sol, t, u):
    r = math.exp(-t)
    _, g1, _ = (float(v) for v in sol.model.derivs(u))
    if not g1 > 0:
        return -math.inf
    return sol.log_lambda + math.log(float(sol.weight.h(r))) - 2.0 * t + float(sol.model.g(u)) + math.log(g1)


def _phi_min_between(track, diag, t_lo, t_hi):
    """t of the smallest phi between two maxima, refined where possible."""
    tt = diag.t[::-1]
    lp = diag.log_phi[::-1]
    sel = np.nonzero((tt > t_lo) & (tt < t_hi) & np.isfinite(lp))[0]
    if len(sel) == 0:
        return 0.5 * (t_lo + t_hi)
    j = int(sel[np.argmin(lp[sel])])
    for a, b in ((j - 1, j), (j, j + 1)):
        if 0 <= a and b < len(tt):
            lo, hi = max(tt[a], t_lo), min(tt[b], t_hi)
            if hi > lo:
                fa, fb = track.dlogphi_at(lo), track.dlogphi_at(hi)
                if np.isfinite(fa) and np.isfinite(fb) and fa < 0 < fb:
                    return brentq(track.dlogphi_at, lo, hi, xtol=1e-13, rtol=1e-15)
    return float(tt[j])


def _floor_crossing(track, diag, t_peak, peak_floor):
    """Outward (decreasing t) end of the last window."""
    tt = diag.t[::-1]
    lp = diag.log_phi[::-1]
    log_floor = math.log(peak_floor)
    idx = np.nonzero(tt < t_peak)[0]
    for i in idx[::-1]:
        if not np.isfinite(lp[i]):
            return float(tt[i + 1]) if i + 1 < len(tt) else float(tt[i])
        if lp[i] < log_floor:
            lo, hi = tt[i], tt[i + 1]

            def f(x):
                u, _ = track.state(x)
                return _log_phi_at(track.sol, x, u) - log_floor

            if hi > lo and f(lo) < 0 < f(hi):
                return brentq(f, lo, hi, xtol=1e-12)
            return float(lo)
    return float(tt[0])


def detect_bubbles(diag, solution, model=None, table=None, peak_floor=DEFAULT_PEAK_FLOOR,
                   window_rule="phi-min"):
    """Concentration events ordered by decreasing height ``u(r_k)``.

    ``window_rule`` is ``"phi-min"`` (windows meet at the minimum of phi
    between neighbours; the first opens at the center and the last closes
    where phi drops below ``peak_floor``) or ``"gamma-multiple:c"``
    (window ``[gamma_k / c, c gamma_k]`` in r, the first still opening at
    the center).  Profile targets use ``table.a`` when a table is given.
    """
    model = model or solution.model
    rule, factor = _parse_window_rule(window_rule)
    track = _Track(solution)
    peaks = find_phi_maxima(solution, diag, peak_floor)
    if not peaks:
        return []
    g_mu, g1_mu, _ = (float(v) for v in model.derivs(solution.mu))
    events = []
    for k, (tc, edge) in enumerate(peaks, start=1):
        u, m = track.state(tc)
        _, g1, _ = (float(v) for v in model.derivs(u))
        log_phi = _log_phi_at(solution, tc, u)
        log_gamma = -0.5 * (log_phi + 2.0 * tc)  # phi = (r/gamma)^2
        events.append(
            ConcentrationEvent(
                k=k,
                r_center=math.exp(-tc),
                t_center=tc,
                u_center=u,
                phi_peak=math.exp(log_phi),
                psi_at_peak=g1 * m,
                gamma=math.exp(log_gamma),
                window=(0.0, 0.0),
                window_t=(0.0, 0.0),
                boundary_peak=edge,
            )
        )
    # windows in t: (outer, inner) with inner > outer
    bounds = []
    for i, ev in enumerate(events):
        if rule == "phi-min":
            inner = math.inf if i == 0 else _phi_min_between(track, diag, ev.t_center, events[i - 1].t_center)
            if i + 1 < len(events):
                outer = _phi_min_between(track, diag, events[i + 1].t_center, ev.t_center)
            else:
                outer = _floor_crossing(track, diag, ev.t_center, peak_floor)
        else:
            lg = math.log(ev.gamma)
            inner = math.inf if i == 0 else -(lg - math.log(factor))
            outer = max(-(lg + math.log(factor)), 0.0)
        outer = min(outer, ev.t_center)
        bounds.append((outer, inner))
    for ev, (outer, inner) in zip(events, bounds):
        ev.window_t = (outer, inner)
        ev.window = (0.0 if math.isinf(inner) else math.exp(-inner), math.exp(-outer))
    for i, ev in enumerate(events):
        ef, efs = window_energies(solution, ev, model, _track=track)[:2]
        ev.energy_fprime, ev.energy_f_scaled = ef, efs
        if i + 1 < len(events):
            ev.gap_energy_to_next = gap_energy(solution, ev, events[i + 1], model, _track=track)
        ev.height_ratio = ev.u_center / solution.mu
        ev.height_log = (solution.mu - ev.u_center) * g1_mu / g_mu
        ev.position_ratio = ev.t_center / g_mu
        a = _profile_a(table, ev.k)
        if a is not None:
            try:
                res = rescale_window(solution, ev, model, a=a, _track=track)
                ev.profile_mismatch = res["mismatch"]
                ev.phi_shape_mismatch = res["phi_shape_mismatch"]
            except DomainError:
                pass
    return events


def _profile_a(table, k):
    if table is None:
        return 2.0 if k == 1 else None
    if k > len(table.a):
        return None
    return float(table.a[k - 1])


def window_energies(solution, event, model=None, _track=None):
    """``(energy_fprime, energy_f_scaled, gap_energy_to_next)`` for one window.

    ``energy_f_scaled`` uses ``int_window w dt = m(outer) - m(inner)``
    (``m(inf) = 0``); the gap entry is filled by :func:`detect_bubbles`.
    """
    model = model or solution.model
    track = _track or _Track(solution)
    outer, inner = event.window_t
    if not (math.isinf(inner) or inner > outer):
        return 0.0, 0.0, event.gap_energy_to_next
    t_first = float(track.t[-1])
    hi = min(inner, t_first)
    e_fp = track.integral(outer, hi, track.fprime_integrand)
    m_outer = track.state(outer)[1]
    if math.isinf(inner):
        # part inside the start radius, from the center expansion
        c_log = solution.log_center_scale()
        g1_mu = float(model.derivs(solution.mu)[1])
        e_fp += g1_mu * math.exp(c_log - 2.0 * t_first) / 2.0
        mass = m_outer
    else:
        mass = m_outer - track.state(hi)[1]
    _, g1k, _ = (float(v) for v in model.derivs(event.u_center))
    return e_fp, g1k * mass, event.gap_energy_to_next


def gap_energy(solution, event, next_event, model=None, _track=None):
    """``g'(mu) int lambda h f(u) r dr`` between two consecutive windows."""
    model = model or solution.model
    track = _track or _Track(solution)
    t_hi = event.window_t[0]
    t_lo = next_event.window_t[1]
    if not t_hi > t_lo:
        return 0.0
    g1_mu = float(model.derivs(solution.mu)[1])
    return g1_mu * (track.state(t_lo)[1] - track.state(t_hi)[1])


def total_energy(solution, model=None):
    """``int lambda h f'(u) r dr`` over the part of the disc where ``u >= t0``."""
    model = model or solution.model
    track = _Track(solution)
    valid = track.u >= model.t0
    if not np.any(valid):
        return 0.0
    t_lo = float(track.t[np.argmax(valid)])
    t_hi = float(track.t[-1])
    c_log = solution.log_center_scale()
    g1_mu = float(model.derivs(solution.mu)[1])
    tail = g1_mu * math.exp(c_log - 2.0 * t_hi) / 2.0
    return track.integral(t_lo, t_hi, track.fprime_integrand) + tail


def total_mass_scaled(solution, model=None):
    """``g'(mu) int_0^1 lambda h f(u) r dr = g'(mu) m(1)``."""
    model = model or solution.model
    return float(model.derivs(solution.mu)[1]) * float(solution.m[-1])


def rescale_window(solution, event, model=None, a=None, table=None, _track=None, n_min=10,
                   band=3.0):
    """Compare the rescaled solution on the event window with the profile.

    ``z_n(rho) = g'(u_k) (u(gamma_k rho) - u_k)`` is sampled at the grid points
    inside the window and compared with the tower profile of parameter ``a``
    (``table.a[k-1]`` when a table is given; ``a = 2`` is the regular
    bubble).  Convergence to the profile is locally uniform, so ``mismatch``
    and ``phi_shape_mismatch`` (``sup |phi(gamma rho)/(rho^2 e^z) - 1|``) are
    taken over window samples with ``|log(rho/rho_k)| <= band``;
    ``mismatch_full`` is the sup over the whole window.
    """
    model = model or solution.model
    track = _track or _Track(solution)
    if a is None:
        a = _profile_a(table, event.k)
    if a is None:
        raise DomainError(f"no profile parameter for event {event.k}")
    outer, inner = event.window_t
    sel = (track.t >= outer) & (track.t <= inner)
    if int(np.count_nonzero(sel)) < n_min:
        raise DomainError(f"window of event {event.k} holds fewer than {n_min} samples")
    t = track.t[sel]
    u = track.u[sel]
    _, g1k, _ = (float(v) for v in model.derivs(event.u_center))
    log_rho = -t - math.log(event.gamma)
    rho = np.exp(log_rho)
    z_n = g1k * (u - event.u_center)
    prof = tower_profile(a)
    if a == 2.0:
        z_t = np.asarray(eval_profile(prof, rho)[0])
    else:
        z_t = np.asarray(z_of_log_r(prof, log_rho))
    diff = np.abs(z_n - z_t)
    near = np.abs(log_rho - (-event.t_center - math.log(event.gamma))) <= band
    if not np.any(near):
        raise DomainError(f"no samples of event {event.k} within the comparison band")
    # phi(gamma rho) / (rho^2 e^{z})
    r = np.exp(-t)
    g, g1, _ = (np.asarray(v, dtype=float) for v in model.derivs(u))
    log_phi = solution.log_lambda + np.log(solution.weight.h(r)) - 2.0 * t + g + np.log(g1)
    shape = np.abs(np.expm1(log_phi - 2.0 * log_rho - z_t))
    return {
        "rho": rho,
        "z_n": z_n,
        "z_target": z_t,
        "mismatch": float(np.max(diff[near])),
        "mismatch_full": float(np.max(diff)),
        "phi_shape_mismatch": float(np.max(shape[near])),
    }


# ---------------------------------------------------------------------------
# ladder report


def _weakly_decreasing(values, tol=0.0):
    vals = [v for v in values if v is not None and np.isfinite(v)]
    return all(b <= a + tol for a, b in zip(vals, vals[1:]))


def asymptotics_report(runs, model=None, table=None):
    """Trend rows over a ladder of runs ``[(solution, events), ...]``.

    Each row records measured values, targets and absolute gaps; the summary
    flags whether every gap sequence is weakly decreasing along the ladder.
    """
    if len(runs) < 3:
        raise DomainError("asymptotics_report needs at least three runs")
    mus = [sol.mu for sol, _ in runs]
    if any(b <= a for a, b in zip(mus, mus[1:])):
        raise DomainError("runs must have increasing mu")
    model = model or runs[0][0].model
    q, p = model.nominal_q, model.nominal_p
    limit = math.isinf(p)
    lam_target = 0.0 if q < 2.0 else (2.0 - p) / 2.0
    rows = []
    for sol, events in runs:
        g_mu = float(model.g(sol.mu))
        row = {
            "mu": sol.mu,
            "g_mu": g_mu,
            "log_inv_lambda_over_g": -sol.log_lambda / g_mu,
            "log_inv_lambda_target": lam_target,
            "total_energy": total_energy(sol, model),
            "n_events": len(events),
            "events": [],
        }
        row["log_inv_lambda_gap"] = abs(row["log_inv_lambda_over_g"] - lam_target)
        if table is not None:
            n = min(len(events), len(table.a))
            row["sum_2a_target"] = 2.0 * math.fsum(table.a[:max(n, 1)])
        if events:
            row["first_window_energy"] = events[0].energy_fprime
            row["first_window_gap"] = abs(events[0].energy_fprime - 4.0)
        for ev in events:
            e = {"k": ev.k, "phi_peak": ev.phi_peak, "psi": ev.psi_at_peak,
                 "psi_gap": abs(ev.psi_at_peak - 2.0)}
            if table is not None and ev.k <= len(table.a):
                a_k = table.a[ev.k - 1]
                e["phi_target"] = a_k**2 / 2.0
                e["phi_gap"] = abs(ev.phi_peak - e["phi_target"])
                e["position_ratio"] = ev.position_ratio
                e["position_target"] = table.eta[ev.k - 1] / 2.0
                e["position_gap"] = abs(ev.position_ratio - e["position_target"])
                if limit:
                    e["height_log"] = ev.height_log
                    e["height_target"] = -table.log_eta[ev.k - 1]
                    e["height_gap"] = abs(ev.height_log - e["height_target"])
                else:
                    e["height_ratio"] = ev.height_ratio
                    e["height_target"] = table.delta[ev.k - 1]
                    e["height_gap"] = abs(ev.height_ratio - e["height_target"])
            row["events"].append(e)
        rows.append(row)

    def series(key, k=None):
        out = []
        for row in rows:
            if k is None:
                out.append(row.get(key))
            else:
                match = [e for e in row["events"] if e["k"] == k]
                out.append(match[0].get(key) if match else None)
        return out

    monotone = {
        "log_inv_lambda_gap": _weakly_decreasing(series("log_inv_lambda_gap")),
        "first_window_gap": _weakly_decreasing(series("first_window_gap")),
    }
    k_max = max((len(r["events"]) for r in rows), default=0)
    for k in range(1, k_max + 1):
        for key in ("phi_gap", "psi_gap", "height_gap", "position_gap"):
            vals = series(key, k)
            if any(v is not None for v in vals):
                monotone[f"{key}[{k}]"] = _weakly_decreasing(vals)
    return {"q": q, "p": p, "rows": rows, "monotone": monotone}
