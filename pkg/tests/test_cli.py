import csv
import io
import json
import subprocess
import sys

import pytest

from agesched import cli
from agesched.experiment import COLUMNS

FAST = ["--set", "sim.n_deliveries=20000", "--set", "waterfill.n_deliveries=20000",
        "--set", "sim.replications=3"]


def test_solve_summary(tmp_path, capsys):
    out = tmp_path / "policy.txt"
    assert cli.main(["solve", "-o", str(out)]) == 0
    text = capsys.readouterr().out
    summary = dict(line.split(": ", 1) for line in text.strip().splitlines())
    assert summary["threshold_property_verified"] == "true"
    assert summary["states"] == "1250"
    assert float(summary["beta_star"]) == pytest.approx(13.3418, abs=1e-3)
    assert out.exists()


def test_solve_degenerate(tmp_path, capsys):
    args = ["solve", "-o", str(tmp_path / "p.txt"), "--set", "problem.m=1",
            "--set", "problem.distribution=2:1", "--set", "grid.max_wait=0"]
    assert cli.main(args) == 0
    summary = dict(line.split(": ", 1) for line in capsys.readouterr().out.strip().splitlines())
    assert float(summary["beta_star"]) == pytest.approx(3.0, abs=1e-4)


def test_bad_config_exit_code(capsys):
    assert cli.main(["solve", "--set", "problem.distribution=0:0.5,3:0.4"]) == 2
    assert "sum to 0.9" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path, capsys):
    assert cli.main(["solve", "-o", str(tmp_path / "p.txt"), "--set", "solver.max_rvi_iters=2"]) == 4
    assert "residual" in capsys.readouterr().err


def test_simulate_needs_policy_file(capsys):
    assert cli.main(["simulate", "--policy", "MAF+Table"]) == 3
    assert cli.main(["simulate", "--policy", "MAF+Table", "--policy-file", "/nonexistent"]) == 3


def test_simulate_rows(tmp_path, capsys):
    policy = tmp_path / "policy.txt"
    cli.main(["solve", "-o", str(policy)])
    capsys.readouterr()
    assert cli.main(["simulate", "--policy-file", str(policy), "--seed", "5", *FAST]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert tuple(rows[0]) == COLUMNS
    by = {r["policy"]: r for r in rows}
    assert set(by) == {"MAF+ZeroWait", "RAND+ZeroWait", "MAF+ConstantWait", "MAF+Table", "MAF+WaterFill"}
    assert float(by["MAF+ZeroWait"]["taa"]) == pytest.approx(13.5, rel=0.02)
    assert float(by["RAND+ZeroWait"]["taa"]) > float(by["MAF+ZeroWait"]["taa"])
    assert float(by["MAF+Table"]["taa"]) == pytest.approx(float(by["MAF+Table"]["beta_star"]), rel=0.02)
    assert {r["seed"] for r in rows} == {"5"} and len({r["config_hash"] for r in rows}) == 1


def test_simulate_rejects_mismatched_table(tmp_path, capsys):
    policy = tmp_path / "policy.txt"
    cli.main(["solve", "-o", str(policy)])
    args = ["simulate", "--policy", "MAF+Table", "--policy-file", str(policy), "--set", "problem.p=0.3"]
    assert cli.main(args) == 2


def test_sweep_is_reproducible(tmp_path):
    args = ["sweep", *FAST, "--set", "experiment.sweep_step=0.4"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main([*args, "-o", str(a)]) == 0
    assert cli.main([*args, "-o", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(a.open()))
    assert [r["value"] for r in rows[::5]] == ["0.1", "0.5", "0.9"]


def test_sweep_failure_keeps_partial_rows(tmp_path, monkeypatch, capsys):
    from agesched import experiment
    from agesched.exceptions import SolverError

    real = experiment.evaluate

    def flaky(cfg, *a, **k):
        if cfg.get("problem.p") == "0.5":
            raise SolverError("boom")
        return real(cfg, *a, **k)

    monkeypatch.setattr(experiment, "evaluate", flaky)
    out = tmp_path / "s.csv"
    args = ["sweep", *FAST, "--set", "experiment.sweep_step=0.4",
            "--set", "experiment.roster=MAF+ZeroWait", "-o", str(out)]
    assert cli.main(args) == 4
    lines = out.read_text().splitlines()
    assert len(lines) == 3 and lines[-1].startswith("# ABORTED at value=0.5")


def test_verify_report(capsys):
    args = ["verify", "--set", "problem.m=1", "--set", "problem.distribution=1:0.5,2:0.5",
            "--set", "grid.max_wait=1", "--set", "grid.step=1",
            "--set", "verify.coupling_seeds=2", "--set", "verify.coupling_deliveries=2000"]
    assert cli.main(args) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pass"]
    assert report["oracle"]["max_residual"] <= 1e-6
    assert {"oracle", "threshold", "monotonicity", "coupling", "saturation"} <= set(report)


def test_verify_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_all", lambda *a, **k: {"pass": False, "coupling": {"pass": False}})
    assert cli.main(["verify"]) == 5
    assert "coupling" in capsys.readouterr().err


def test_console_script(tmp_path):
    res = subprocess.run([sys.executable, "-m", "agesched.cli", "solve", "-o", str(tmp_path / "p.txt"),
                          "--set", "problem.m=1", "--set", "problem.distribution=3:1",
                          "--set", "grid.max_wait=0"], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "beta_star: 4.49" in res.stdout
