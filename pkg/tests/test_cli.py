"""End-to-end command-line behavior: exit codes, outputs, determinism."""

import glob
import json
import os

import numpy as np
import pytest

from ldonline import cli

BASE = """
[topology]
kind = "ring"
m = 3

[domain]
kind = "ball"
center = [0.0, 0.0]
radius = 1.0

[problem]
loss = "ridge"
alpha = 0.5

[schedules]
gamma0 = 0.3
u = 0.7
lambda0 = 0.001
v = 0.8
regime = "theorem1"

[noise]
sigma = 1.0
varsigma = 0.1

[stream]
kind = "synthetic_linear"
theta_true = [0.5, -0.3]
feature_bound = 1.0
label_noise = 0.1

[run]
horizon = 64
seed = 7
"""

DIVERGENT = """
[topology]
kind = "ring"
m = 2

[domain]
kind = "ball"
center = [0.0]
radius = 1.0

[problem]
loss = "ridge"
alpha = 0.5
mu = 1.0
lipschitz = 2.0
grad_bound = 1000.0
kappa_sq = 1.0
l1_clip = 1000.0

[schedules]
gamma0 = 0.1
u = 0.7
lambda0 = 0.1
v = 0.8

[stream]
kind = "file"
path = "{path}"

[run]
horizon = 8
checkpoints = [2]
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "cfg.toml"
    p.write_text(BASE)
    return str(p)


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_usage_errors_exit_64(cfg_path):
    with pytest.raises(SystemExit) as e:
        cli.main([])
    assert e.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as e:
        cli.main(["run", cfg_path, "--bogus-flag"])
    assert e.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as e:
        cli.main(["frobnicate", cfg_path])
    assert e.value.code == cli.EXIT_USAGE


def test_validate_config_ok(cfg_path, capsys):
    assert cli.main(["validate-config", cfg_path]) == cli.EXIT_OK
    report = _json_out(capsys)
    assert report["ok"] is True
    assert report["violations"] == []
    assert "config_digest" in report


def test_validate_config_regime_violation(cfg_path, capsys):
    code = cli.main(["validate-config", cfg_path,
                     "--override", "schedules.lambda0=5.0"])
    assert code == cli.EXIT_INVALID
    report = _json_out(capsys)
    assert report["ok"] is False and report["violations"]


def test_validate_config_switch_time_regimes(cfg_path, capsys):
    code = cli.main(["validate-config", cfg_path,
                     "--override", 'schedules.regime="theorem3"',
                     "--override", "schedules.gamma0=1.0",
                     "--override", "schedules.u=0.3",
                     "--override", "schedules.lambda0=0.1",
                     "--override", "schedules.v=0.4"])
    assert code == cli.EXIT_OK
    assert _json_out(capsys)["t0"] >= 0


def test_missing_config_exits_1(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "none.toml")]) == cli.EXIT_INVALID
    assert "configuration error" in capsys.readouterr().err


def test_structural_error_exits_1(cfg_path, capsys):
    code = cli.main(["run", cfg_path, "--override", "run.horizon=0"])
    assert code == cli.EXIT_INVALID


def test_runtime_failure_exits_2(tmp_path, capsys):
    data = tmp_path / "huge.svm"
    data.write_text("0 1:1e200\n0 1:1e200\n")
    p = tmp_path / "div.toml"
    p.write_text(DIVERGENT.format(path=data))
    code = cli.main(["run", str(p)])
    assert code == cli.EXIT_RUNTIME
    assert "simulation error" in capsys.readouterr().err


def test_run_writes_trace_and_is_byte_identical(cfg_path, tmp_path, capsys):
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    assert cli.main(["run", cfg_path, "--out", str(out1)]) == cli.EXIT_OK
    capsys.readouterr()
    assert cli.main(["run", cfg_path, "--out", str(out2)]) == cli.EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()
    trace = json.loads(out1.read_text())
    assert trace["checkpoints"][0] == 0
    assert len(trace["eps_partial"]) == 3
    # no temp files left behind by the atomic writer
    assert not glob.glob(str(tmp_path / ".tmp-*"))
    summary = _json_out(capsys)
    assert summary["config_digest"] == trace["config_digest"]


def test_run_csv_output(cfg_path, tmp_path):
    out = tmp_path / "trace.csv"
    assert cli.main(["run", cfg_path, "--out", str(out)]) == cli.EXIT_OK
    rows = out.read_text().strip().splitlines()
    header = rows[0].split(",")
    assert header[:3] == ["t", "tracking_error", "instantaneous_regret"]
    assert len(rows) == len(header) > 3 or len(rows) > 1


def test_seed_flag_changes_output(cfg_path, tmp_path):
    out1, out2 = tmp_path / "s1.json", tmp_path / "s2.json"
    cli.main(["run", cfg_path, "--seed", "1", "--out", str(out1)])
    cli.main(["run", cfg_path, "--seed", "2", "--out", str(out2)])
    a, b = json.loads(out1.read_text()), json.loads(out2.read_text())
    assert a["tracking_error"] != b["tracking_error"]
    assert a["config_digest"] != b["config_digest"]


def test_dry_run_smoke(cfg_path, tmp_path, capsys):
    out = tmp_path / "never.json"
    code = cli.main(["run", cfg_path, "--dry-run", "--out", str(out)])
    assert code == cli.EXIT_OK
    assert not out.exists()
    report = _json_out(capsys)
    assert report["smoke_rounds"] == 10
    assert report["engine"] == "affine"


def test_sweep_writes_index_and_traces(cfg_path, tmp_path, capsys):
    out = tmp_path / "sweepdir"
    code = cli.main(["sweep", cfg_path, "--param", "schedules.lambda0",
                     "--values", "0.001,0.002", "--out", str(out),
                     "--horizon", "32"])
    assert code == cli.EXIT_OK
    index = json.loads((out / "sweep_index.json").read_text())
    assert len(index) == 2
    for entry in index:
        assert os.path.exists(entry["trace"])
        assert entry["param"] == "schedules.lambda0"


def test_sensitivity_reports_bound_respected(cfg_path, tmp_path, capsys):
    out = tmp_path / "sens.json"
    code = cli.main(["sensitivity", cfg_path, "--learner", "1", "--k", "3",
                     "--trials", "2", "--horizon", "40", "--out", str(out)])
    assert code == cli.EXIT_OK
    report = json.loads(out.read_text())
    assert report["ok"] is True
    assert 0 <= report["worst_ratio"] <= 1.0
    assert len(report["trials"]) == 2


def test_budget_positional_rounds(cfg_path, capsys):
    code = cli.main(["budget", cfg_path, "1000", "10000", "100000"])
    assert code == cli.EXIT_OK
    report = _json_out(capsys)
    assert report["checkpoints"] == [1000, 10000, 100000]
    eps = report["learners"]["0"]["eps_partial"]
    assert 0 < eps[0] < eps[1] < eps[2]
    assert eps[2] - eps[1] < eps[1] - eps[0]
    assert report["learners"]["0"]["tail_exponent"] > 1.0


def test_repository_configs_validate(capsys):
    paths = glob.glob("configs/*.toml")
    assert paths
    for p in paths:
        assert cli.main(["validate-config", p]) == cli.EXIT_OK, p
        capsys.readouterr()
