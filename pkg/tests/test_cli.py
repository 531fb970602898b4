import csv
import json
import math

import pytest

from bubbleshoot.cli import (
    EXIT_DOMAIN,
    EXIT_OK,
    EXIT_USAGE,
    UsageError,
    dumps,
    fmt,
    main,
    parse_args,
    parse_grid,
    sidecar_path,
)


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_recurrence_example():
    cfg = parse_args(["recurrence", "--q", "1.5", "--k", "10", "--out", "t.csv"])
    assert cfg.command == "recurrence" and cfg.q == 1.5 and cfg.k == 10


def test_parse_solve_example():
    cfg = parse_args(["solve", "--model", "power-exp:p=3", "--mu", "6.0", "--out", "s.csv"])
    assert cfg.model == "power-exp:p=3" and cfg.mu == 6.0


def test_malformed_model_reports_position():
    with pytest.raises(UsageError) as info:
        parse_args(["solve", "--model", "power-exp:p=two", "--mu", "6", "--out", "s.csv"])
    assert info.value.flag == "--model"
    assert "p=two" in str(info.value)


@pytest.mark.parametrize(
    "argv, flag",
    [
        (["recurrence", "--q", "2.5", "--k", "3"], "--q"),
        (["recurrence", "--q", "1.5", "--k", "0"], "--k"),
        (["recurrence", "--q", "1.5", "--k", "3", "--bogus"], None),
        (["solve", "--model", "pure-exp", "--mu", "nan", "--out", "x.csv"], "--mu"),
        (["sweep", "--model", "pure-exp", "--mu-min", "3", "--mu-max", "1", "--points", "5", "--out", "b.csv"],
         "--mu-max"),
        (["profile", "--grid", "log:lo=1,hi=0.5,n=3"], "--grid"),
    ],
)
def test_usage_errors(argv, flag):
    with pytest.raises(UsageError) as info:
        parse_args(argv)
    if flag:
        assert info.value.flag == flag


def test_usage_exit_code(capsys):
    assert main(["recurrence", "--q", "3", "--k", "2"]) == EXIT_USAGE
    err = json.loads(capsys.readouterr().err)
    assert err["kind"] == "usage" and err["flag"] == "--q"


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 2.0**-1074, 1e308, -0.0):
        assert float(fmt(x)) == x


def test_json_nonfinite_is_null():
    assert json.loads(dumps({"x": math.inf, "y": [math.nan, 1.5]})) == {"x": None, "y": [None, 1.5]}


def test_grid_specs():
    assert len(parse_grid("lin:lo=1,hi=2,n=5")) == 5
    assert parse_grid("log:lo=1e-2,hi=1e2,n=5")[2] == pytest.approx(1.0)
    with pytest.raises(UsageError):
        parse_grid("cubic:lo=1,hi=2,n=3")


def test_recurrence_csv(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["recurrence", "--q", "1.5", "--k", "3", "--out", str(out)]) == EXIT_OK
    rows = _csv(out)
    assert list(rows[0]) == ["k", "a_k", "delta_k", "eta_k", "eta_tilde_k"]
    assert float(rows[1]["a_k"]) == pytest.approx(2 * math.sqrt(3) - 2, abs=1e-15)


def test_profile_csv(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["profile", "--a", "1", "--grid", "log:lo=1e-2,hi=1e2,n=9", "--out", str(out)]) == EXIT_OK
    rows = _csv(out)
    assert len(rows) == 9 and list(rows[0]) == ["r", "z", "z_prime", "r2_ez"]


def test_solve_and_detect_gelfand(tmp_path):
    sol = tmp_path / "s.csv"
    rep = tmp_path / "r.json"
    assert main(["solve", "--model", "pure-exp", "--mu", "3", "--out", str(sol)]) == EXIT_OK
    side = json.loads(open(sidecar_path(str(sol))).read())
    for key in ("mu", "log_lambda", "r_zero_pre_rescale", "residuals", "steps", "scalar_mode", "config"):
        assert key in side
    assert set(side["residuals"]) >= {"id1", "id2", "pohozaev"}
    rows = _csv(sol)
    assert list(rows[0]) == ["t", "r", "u", "m", "log_rhs", "phi", "psi"]
    assert main(["detect", "--solution", str(sol), "--model", "pure-exp", "--report", str(rep)]) == EXIT_OK
    report = json.loads(rep.read_text())
    assert len(report["events"]) == 1
    ev = report["events"][0]
    for key in ("k", "r_center", "phi_peak", "psi", "gamma", "window", "energy_fprime", "energy_f_scaled",
                "height_ratio", "height_log", "position_ratio", "profile_mismatch"):
        assert key in ev
    assert set(report["totals"]) == {"energy", "sum_2a_target"}
    assert report["config"]["command"] == "detect"


def test_detect_needs_sidecar(tmp_path, capsys):
    sol = tmp_path / "s.csv"
    sol.write_text("t,r,u,m,log_rhs,phi,psi\n")
    assert main(["detect", "--solution", str(sol), "--model", "pure-exp"]) == EXIT_USAGE


def test_precision_exit(tmp_path, capsys):
    code = main(["solve", "--model", "power-exp:p=3", "--mu", "9.5", "--out", str(tmp_path / "s.csv")])
    assert code == EXIT_DOMAIN
    err = json.loads(capsys.readouterr().err)
    assert err["kind"] == "precision"


def test_compensated_solve(tmp_path):
    out = tmp_path / "s.csv"
    argv = ["solve", "--model", "power-exp:p=3", "--mu", "9.5", "--scalar-mode", "compensated", "--out", str(out)]
    assert main(argv) == EXIT_OK
    assert json.loads(open(sidecar_path(str(out))).read())["scalar_mode"] == "compensated"


def test_byte_identical_reruns(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"b{i}.csv"
        argv = ["sweep", "--model", "pure-exp", "--mu-min", "0.5", "--mu-max", "3", "--points", "11",
                "--out", str(out), "--json", str(tmp_path / "side.json")]
        assert main(argv) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_sweep_turning_point(tmp_path):
    out = tmp_path / "b.csv"
    argv = ["sweep", "--model", "pure-exp", "--mu-min", "0.5", "--mu-max", "3", "--points", "11", "--out", str(out)]
    assert main(argv) == EXIT_OK
    rows = _csv(out)
    assert list(rows[0]) == ["mu", "log_lambda", "lambda", "total_energy", "bubble_count", "turning_flag"]
    assert sum(int(r["turning_flag"]) for r in rows) == 1
    side = json.loads(open(sidecar_path(str(out))).read())
    (tp,) = side["turning_points"]
    assert abs(tp["mu"] - 2 * math.log(2)) < 1e-4 and abs(tp["lambda"] - 2) < 1e-6


@pytest.mark.parametrize("suite", ["recurrence", "identities", "profiles"])
def test_verify_suites(tmp_path, suite):
    rep = tmp_path / "v.json"
    assert main(["verify", "--suite", suite, "--report", str(rep)]) == EXIT_OK
    data = json.loads(rep.read_text())
    assert data["ok"] and data["suite"] == suite


def test_version(capsys):
    assert main(["--version"]) == 0
    assert "bubbleshoot" in capsys.readouterr().out
