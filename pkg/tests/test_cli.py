import json

import pytest

from switchcost import cli
from switchcost.contracts import CONTRACT_COLUMNS

POINT = ["--delta-C", "0.5", "--delta-F", "0.5", "--rho", "0.2", "--mu", "0.5", "--s", "0.3"]


def run(argv, env=None):
    return cli.run(argv, environ=env or {})


def test_solve_stdout(capsys):
    assert run(["solve", *POINT]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out["policy"]) == {"d", "e"}
    assert abs(out["dynamics"]["theta"]) <= 1
    assert out["markup"] > 0


def test_solve_params_file(tmp_path, capsys):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"delta_C": 0.5, "delta_F": 0.5, "rho": 0.2, "mu": 0.5, "s": 0.9}))
    assert run(["solve", "--params", str(path), "--s", "0.3"]) == 0
    assert json.loads(capsys.readouterr().out)["params"]["s"] == 0.3


def test_exit_codes(tmp_path, capsys):
    assert run(["solve", *POINT[:-2], "--s", "1.5"]) == 2
    assert run(["solve", "--delta-C", "0.5"]) == 1
    assert run(["nosuch"]) == 1
    assert run(["solve", "--bogus"]) == 1
    assert run(["synth", "--n", "5"]) == 1
    assert run(["solve", *POINT[:6], "--mu", "2", "--s", "0.3"]) == 1
    assert run(["derive", "--contracts", str(tmp_path / "missing.csv")]) == 1
    err = capsys.readouterr().err
    assert "synth needs --seed" in err


def test_degenerate_mu_is_usage_error():
    argv = ["solve", "--delta-C", "0.5", "--delta-F", "0.5", "--rho", "0.2", "--mu", "0",
            "--s", "0.3"]
    assert run(argv) == 1


def test_help_documents_schemas(capsys):
    for cmd, needle in [("solve", "dynamics"), ("sweep", "lock_in_path"),
                        ("derive", "expected_date"), ("synth", "z_sigma_lag2"),
                        ("estimate", "usable_rows"), ("counterfactual", "pct_change"),
                        ("simulate", "sigma")]:
        assert run([cmd, "--help"]) == 0
        assert needle in capsys.readouterr().out
    assert run(["--help"]) == 0
    assert "SWITCHCOST_SEED" in capsys.readouterr().out


def test_synth_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["synth", "--n", "187", "--seed", "7", "-o", str(a)]) == 0
    assert run(["synth", "--n", "187", "--seed", "7", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 188


def test_env_fallback_and_precedence(tmp_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert run(["synth", "--n", "5", "-o", str(a)], env={"SWITCHCOST_SEED": "3"}) == 0
    assert run(["synth", "--n", "5", "--seed", "3", "-o", str(b)]) == 0
    assert run(["synth", "--n", "5", "--seed", "3", "-o", str(c)],
               env={"SWITCHCOST_SEED": "4"}) == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()


def test_simulate(capsys):
    assert run(["simulate", *POINT, "--sigma0", "0.7", "--T", "4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,sigma,price" and len(lines) == 6


def test_sweep_small_grid(tmp_path):
    grid = tmp_path / "g.json"
    grid.write_text(json.dumps({"delta_C": [0.5], "delta_F": [0.5], "rho": [0.2],
                                "mu": [0.5], "s": [0.1, 0.3, 0.5]}))
    out1, out2, report = tmp_path / "r1.csv", tmp_path / "r2.csv", tmp_path / "rep.json"
    assert run(["sweep", "--grid", str(grid), "-o", str(out1), "--report", str(report)]) == 0
    assert run(["sweep", "-o", str(out2)], env={"SWITCHCOST_GRID": str(grid),
                                                "SWITCHCOST_WORKERS": "2"}) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert len(out1.read_text().splitlines()) == 4
    assert json.loads(report.read_text())["grid_size"] == 3


def test_derive(tmp_path, capsys):
    path = tmp_path / "c.csv"
    row = ["c1", "1992-11-21", "0", "0.1", "0.11", "0.12", "0.1", "0.11", "100", "13", "3",
           "6", "1.25", "0.75", "4", "6", "0.2", "0.6", "0"]
    path.write_text(",".join(CONTRACT_COLUMNS) + "\n" + ",".join(row) + "\n")
    assert run(["derive", "--contracts", str(path)]) == 0
    header, line = capsys.readouterr().out.splitlines()
    rec = dict(zip(header.split(","), line.split(",")))
    assert rec["tport"] == "1.6100000000000001" and rec["dport"] == "0"


def test_estimate_and_counterfactual(tmp_path):
    data, cfg = tmp_path / "d.csv", tmp_path / "cfg.json"
    res, cf = tmp_path / "res.json", tmp_path / "cf.json"
    assert run(["synth", "--n", "300", "--seed", "2", "--noise", "0.02,0.005,0.005",
                "-o", str(data)]) == 0
    cfg.write_text(json.dumps({"starts": 4, "polish": 1}))
    assert run(["estimate", "--data", str(data), "--config", str(cfg), "-o", str(res)]) == 0
    out = json.loads(res.read_text())
    assert out["J"]["df"] == 21 and out["observations"] == 300
    assert run(["counterfactual", "--results", str(res), "--scenario",
                "all_contracts_no_transition", "--data", str(data), "-o", str(cf)]) == 0
    assert json.loads(cf.read_text())["scenario"] == "all_contracts_no_transition"
    assert run(["counterfactual", "--results", str(res), "--scenario",
                "steady_state_average"]) == 1
