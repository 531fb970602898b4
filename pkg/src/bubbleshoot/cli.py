"""Command-line entry point: ``bubbleshoot <command> [options]``.

Commands: recurrence, profile, solve, detect, sweep, verify.  Every number is
written with 17 significant digits so files round-trip binary64 exactly and
identical inputs give byte-identical outputs.

Exit codes: 0 success, 1 usage, 2 domain/precision (or a failed ``verify``),
3 internal.  Errors go to standard error as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BubbleShootError, SpecSyntaxError
from .growth import parse_model, parse_spec, parse_weight
from .solver import SCALAR_MODES, RadialSolution, SolverConfig

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_INTERNAL = 0, 1, 2, 3
COMMANDS = ("recurrence", "profile", "solve", "detect", "sweep", "verify")


class UsageError(Exception):
    """Invalid command line; ``flag`` names the offending option."""

    def __init__(self, message, flag=None):
        super().__init__(message)
        self.flag = flag

    def to_dict(self):
        d = {"kind": "usage", "type": "UsageError", "message": str(self)}
        if self.flag:
            d["flag"] = self.flag
        return d


@dataclass
class RunConfig:
    command: str
    options: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.options[name]
        except KeyError:
            raise AttributeError(name) from None


# ---------------------------------------------------------------------------
# formatting


def fmt(x):
    """Full-precision decimal; non-finite values become ``nan``/``inf``/``-inf``."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _json_value(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _json_value(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        # JSON has no inf/nan
        return fmt(obj) if math.isfinite(obj) else "null"
    return json.dumps(str(obj))


def dumps(obj, indent=2):
    """Deterministic JSON with 17-digit floats and ``null`` for non-finite values."""
    return _json_value(obj, indent, 0) + "\n"


def write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8")


def csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(["" if v is None else fmt(v) for v in row])
    return buf.getvalue()


def sidecar_path(csv_path):
    p = Path(csv_path)
    return p.with_suffix(".json") if p.suffix.lower() == ".csv" else p.with_name(p.name + ".json")


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        flag = None
        for token in message.replace(",", " ").split():
            if token.startswith("--"):
                flag = token.strip(":'\"")
                break
        raise UsageError(f"{self.prog}: {message}", flag)


def _finite(flag, lo=None, hi=None, lo_open=False, hi_open=False):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects a number, got {text!r}") from None
        bad = not math.isfinite(v)
        if lo is not None:
            bad = bad or (v <= lo if lo_open else v < lo)
        if hi is not None:
            bad = bad or (v >= hi if hi_open else v > hi)
        if bad:
            lo_b = "(" if lo_open else "["
            hi_b = ")" if hi_open else "]"
            rng = f"{lo_b}{'-inf' if lo is None else lo}, {'inf' if hi is None else hi}{hi_b}"
            raise argparse.ArgumentTypeError(f"{flag}={text} outside {rng}")
        return v

    return conv


def _positive_int(flag, lo=1):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects an integer, got {text!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"{flag}={text} must be >= {lo}")
        return v

    return conv


def _add_solver_flags(p):
    p.add_argument("--h", default="const", help="weight: const, const:c=2 or poly:c0=1,c2=0.5")
    p.add_argument("--eps0", type=_finite("--eps0", 0.0, 0.1, lo_open=True), default=1e-3)
    p.add_argument("--rtol", type=_finite("--rtol", 0.0, 1.0, lo_open=True, hi_open=True), default=1e-10)
    p.add_argument("--atol", type=_finite("--atol", 0.0, None, lo_open=True), default=1e-12)
    p.add_argument("--max-steps", type=_positive_int("--max-steps"), default=200_000)
    p.add_argument("--scalar-mode", choices=SCALAR_MODES, default="binary64")
    p.add_argument("--backend", choices=("cython", "python"), default=None)
    p.add_argument("--lambda-min", type=_finite("--lambda-min", 0.0, None, lo_open=True), default=1e-3)
    p.add_argument("--lambda-max", type=_finite("--lambda-max", 0.0, None, lo_open=True), default=10.0)


def build_parser():
    parser = _Parser(prog="bubbleshoot", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"bubbleshoot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("recurrence", help="tabulate (a_k, delta_k, eta_k, eta~_k)")
    p.add_argument("--q", type=_finite("--q", 1.0, 2.0, hi_open=True), required=True)
    p.add_argument("--k", type=_positive_int("--k"), required=True)
    p.add_argument("--out", default="-")

    p = sub.add_parser("profile", help="sample a Liouville profile")
    p.add_argument("--a", type=_finite("--a", 0.0, 2.0, lo_open=True), default=2.0)
    p.add_argument("--regular", action="store_true", help="regular profile normalized at r = 0")
    p.add_argument("--grid", default="log:lo=1e-3,hi=1e3,n=121",
                   help="log:lo=..,hi=..,n=.. or lin:lo=..,hi=..,n=..")
    p.add_argument("--out", default="-")

    p = sub.add_parser("solve", help="shoot one radial solution")
    p.add_argument("--model", required=True)
    p.add_argument("--mu", type=_finite("--mu", 0.0, None, lo_open=True), required=True)
    _add_solver_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--json", default=None, help="sidecar path (default: next to --out)")

    p = sub.add_parser("detect", help="concentration events of a solved profile")
    p.add_argument("--solution", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--q", type=_finite("--q", 1.0, None), default=None,
                   help="recurrence q for the targets (default: the model's own)")
    p.add_argument("--k-max", type=_positive_int("--k-max"), default=8)
    p.add_argument("--peak-floor", type=_finite("--peak-floor", 0.0, None, lo_open=True), default=1e-3)
    p.add_argument("--window-rule", default="phi-min")
    p.add_argument("--report", default="-")

    p = sub.add_parser("sweep", help="trace lambda(mu) and its turning points")
    p.add_argument("--model", required=True)
    p.add_argument("--mu-min", type=_finite("--mu-min", 0.0, None, lo_open=True), required=True)
    p.add_argument("--mu-max", type=_finite("--mu-max", 0.0, None, lo_open=True), required=True)
    p.add_argument("--points", type=_positive_int("--points", 1), required=True)
    p.add_argument("--width", type=_finite("--width", 0.0, None, lo_open=True), default=1e-5)
    p.add_argument("--no-refine", action="store_true")
    _add_solver_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--json", default=None)

    p = sub.add_parser("verify", help="run an invariant suite")
    p.add_argument("--suite", choices=("growth", "profiles", "identities", "recurrence"), required=True)
    p.add_argument("--report", default="-")
    return parser


def parse_args(argv):
    """Validate ``argv`` into a :class:`RunConfig`; raises :class:`UsageError`."""
    ns = build_parser().parse_args(argv)
    opts = {k: v for k, v in vars(ns).items() if k != "command"}
    # specs are checked here so errors carry the grammar position
    for key, flag, parse in (("model", "--model", parse_model), ("h", "--h", parse_weight)):
        if key in opts:
            try:
                parse(opts[key])
            except BubbleShootError as exc:
                raise UsageError(f"{flag}: {exc}", flag) from None
    if "grid" in opts:
        opts["grid_values"] = parse_grid(opts["grid"])
    if ns.command == "sweep" and not opts["mu_max"] > opts["mu_min"] and opts["points"] > 1:
        raise UsageError("--mu-max must exceed --mu-min", "--mu-max")
    if ns.command in ("solve", "sweep") and not opts["lambda_max"] > opts["lambda_min"]:
        raise UsageError("--lambda-max must exceed --lambda-min", "--lambda-max")
    return RunConfig(ns.command, opts)


def parse_grid(text):
    try:
        kind, vals = parse_spec(text)
    except SpecSyntaxError as exc:
        raise UsageError(f"--grid: {exc}", "--grid") from None
    if kind not in ("log", "lin") or set(vals) != {"lo", "hi", "n"}:
        raise UsageError(f"--grid: expected log:lo=..,hi=..,n=.. or lin:..., got {text!r}", "--grid")
    lo, hi, n = vals["lo"], vals["hi"], vals["n"]
    if not (0 < lo < hi) or n != int(n) or n < 2:
        raise UsageError(f"--grid: need 0 < lo < hi and an integer n >= 2, got {text!r}", "--grid")
    if kind == "log":
        return np.geomspace(lo, hi, int(n))
    return np.linspace(lo, hi, int(n))


def _solver_cfg(cfg):
    return SolverConfig(
        eps0=cfg.eps0,
        rtol=cfg.rtol,
        atol=cfg.atol,
        max_steps=cfg.max_steps,
        scalar_mode=cfg.scalar_mode,
        backend=cfg.backend,
    )


def _echo(cfg):
    return {"command": cfg.command, **{k: v for k, v in cfg.options.items() if k != "grid_values"}}


# ---------------------------------------------------------------------------
# commands


def _cmd_recurrence(cfg):
    from .recurrence import build_table

    tab = build_table(cfg.q, cfg.k)
    write_text(cfg.out, csv_text(["k", "a_k", "delta_k", "eta_k", "eta_tilde_k"], tab.rows()))
    return EXIT_OK


def _cmd_profile(cfg):
    from .profiles import eval_profile, r2_exp_z, regular_profile, tower_profile

    prof = regular_profile() if cfg.regular else tower_profile(cfg.a)
    r = cfg.grid_values
    z, z1, _ = eval_profile(prof, r)
    rows = zip(r, np.atleast_1d(z), np.atleast_1d(z1), np.atleast_1d(r2_exp_z(prof, r)))
    write_text(cfg.out, csv_text(["r", "z", "z_prime", "r2_ez"], rows))
    return EXIT_OK


def _cmd_solve(cfg):
    from .analysis import compute_diagnostics
    from .solver import identity_residuals, shoot

    model = parse_model(cfg.model)
    weight = parse_weight(cfg.h)
    sol = shoot(model, cfg.mu, weight, _solver_cfg(cfg), (cfg.lambda_min, cfg.lambda_max))
    diag = compute_diagnostics(sol)
    log_rhs = sol.log_rhs()
    phi = np.exp(diag.log_phi)
    rows = []
    for i in range(len(sol.t)):
        valid = bool(diag.valid[i])
        rows.append([sol.t[i], sol.r[i], sol.u[i], sol.m[i], log_rhs[i],
                     phi[i] if valid else None, diag.psi[i] if valid else None])
    write_text(cfg.out, csv_text(["t", "r", "u", "m", "log_rhs", "phi", "psi"], rows))
    side = {
        "mu": sol.mu,
        "log_lambda": sol.log_lambda,
        "r_zero_pre_rescale": sol.r_zero_pre_rescale,
        "residuals": identity_residuals(sol),
        "steps": sol.steps,
        "scalar_mode": sol.scalar_mode,
        "rejected": sol.rejected,
        "min_step": sol.min_step,
        "backend": sol.backend,
        "config": _echo(cfg),
    }
    if cfg.out != "-":
        write_text(cfg.json or sidecar_path(cfg.out), dumps(side))
    return EXIT_OK


def read_solution(csv_path, model, weight=None):
    """Rebuild a :class:`RadialSolution` from ``solve`` output and its sidecar."""
    side_path = sidecar_path(csv_path)
    if not side_path.exists():
        raise UsageError(f"--solution: sidecar {str(side_path)!r} not found", "--solution")
    side = json.loads(side_path.read_text(encoding="utf-8"))
    if weight is None:
        weight = parse_weight(side.get("config", {}).get("h", "const"))
    with open(csv_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise UsageError("--solution: empty solution file", "--solution")
    t = np.array([float(r["t"]) for r in rows])
    u = np.array([float(r["u"]) for r in rows])
    m = np.array([float(r["m"]) for r in rows])
    return RadialSolution(
        model=model,
        weight=weight,
        mu=float(side["mu"]),
        log_lambda=float(side["log_lambda"]),
        t=t,
        u=u,
        m=m,
        r_zero_pre_rescale=float(side.get("r_zero_pre_rescale", 1.0)),
        steps=int(side.get("steps", 0)),
        rejected=int(side.get("rejected", 0)),
        min_step=float(side.get("min_step") or math.nan),
        scalar_mode=side.get("scalar_mode", "binary64"),
        backend=side.get("backend", ""),
        info={},
    )


_EVENT_KEYS = (
    "k", "r_center", "phi_peak", "psi", "gamma", "window", "energy_fprime", "energy_f_scaled",
    "height_ratio", "height_log", "position_ratio", "profile_mismatch",
    "gap_energy_to_next", "phi_shape_mismatch", "boundary_peak",
)


def detect_report(sol, model, q=None, k_max=8, peak_floor=1e-3, window_rule="phi-min"):
    """The ``detect`` JSON report as a dict."""
    from .analysis import compute_diagnostics, detect_bubbles, total_energy
    from .recurrence import build_table

    q = model.nominal_q if q is None else q
    table = build_table(q, k_max) if 1.0 <= q < 2.0 else None
    diag = compute_diagnostics(sol)
    events = detect_bubbles(diag, sol, model, table=table, peak_floor=peak_floor, window_rule=window_rule)
    ev_out = []
    for ev in events:
        d = ev.to_dict()
        ev_out.append({k: d[k] for k in _EVENT_KEYS})
    target = None
    if table is not None:
        n = min(max(len(events), 1), len(table.a))
        target = 2.0 * math.fsum(table.a[:n])
    elif events:
        target = 4.0
    return {
        "mu": sol.mu,
        "log_lambda": sol.log_lambda,
        "events": ev_out,
        "totals": {"energy": total_energy(sol, model), "sum_2a_target": target},
    }


def _cmd_detect(cfg):
    model = parse_model(cfg.model)
    sol = read_solution(cfg.solution, model)
    rep = detect_report(sol, model, cfg.q, cfg.k_max, cfg.peak_floor, cfg.window_rule)
    rep["config"] = _echo(cfg)
    write_text(cfg.report, dumps(rep))
    return EXIT_OK


def _cmd_sweep(cfg):
    from .bifurcation import sweep, turning_points

    model = parse_model(cfg.model)
    weight = parse_weight(cfg.h)
    mus = np.linspace(cfg.mu_min, cfg.mu_max, cfg.points)
    branch = sweep(model, weight, mus, _solver_cfg(cfg), with_residuals=False)
    if not cfg.no_refine:
        turning_points(branch, width=cfg.width)
    flags = branch.turning_flags()
    rows = [
        [p.mu, p.log_lambda, p.lam, p.total_energy, p.bubble_count, f]
        for p, f in zip(branch.points, flags)
    ]
    cols = ["mu", "log_lambda", "lambda", "total_energy", "bubble_count", "turning_flag"]
    write_text(cfg.out, csv_text(cols, rows))
    side = {
        "turning_points": [
            {
                "mu": tp.mu,
                "log_lambda": tp.log_lambda,
                "lambda": tp.lam,
                "kind": tp.kind,
                "flanks": list(tp.flanks),
                "slopes": list(tp.slopes),
                "shots": tp.shots,
                "certified": tp.certified,
            }
            for tp in branch.turning_points
        ],
        "config": _echo(cfg),
    }
    if cfg.out != "-":
        write_text(cfg.json or sidecar_path(cfg.out), dumps(side))
    return EXIT_OK


def _cmd_verify(cfg):
    from .suites import run_suite

    res = run_suite(cfg.suite)
    res["config"] = _echo(cfg)
    write_text(cfg.report, dumps(res))
    if not res["ok"]:
        failed = [c["name"] for c in res["checks"] if not c["ok"]]
        sys.stderr.write(dumps({"kind": "verification", "suite": cfg.suite, "failed": failed}, indent=0))
        return EXIT_DOMAIN
    return EXIT_OK


_COMMANDS = {
    "recurrence": _cmd_recurrence,
    "profile": _cmd_profile,
    "solve": _cmd_solve,
    "detect": _cmd_detect,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
}


def _emit_error(d):
    sys.stderr.write(json.dumps(d, sort_keys=True, default=str) + "\n")


def run(cfg):
    """Execute a parsed configuration; returns the exit code."""
    try:
        return _COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        _emit_error(exc.to_dict())
        return EXIT_USAGE
    except BubbleShootError as exc:
        d = exc.to_dict()
        if d["kind"] == "usage":
            _emit_error(d)
            return EXIT_USAGE
        if d["kind"] in ("domain", "precision"):
            _emit_error(d)
            return EXIT_DOMAIN
        _emit_error(d)
        return EXIT_INTERNAL
    except OSError as exc:
        _emit_error({"kind": "usage", "type": type(exc).__name__, "message": str(exc)})
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - last-resort report
        _emit_error({"kind": "internal", "type": type(exc).__name__, "message": str(exc)})
        return EXIT_INTERNAL


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        _emit_error(exc.to_dict())
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
