"""TOML loading, typed overrides, derived constants, error aggregation."""

import numpy as np
import pytest

from ldonline.config import (ConfigError, apply_overrides, build_config,
                             load_config, load_toml, parse_override)
from ldonline.objectives import (LogisticLoss, RidgeLoss, logistic_constants,
                                 ridge_constants)
from ldonline.simulate import (FileStream, SyntheticLinearStream,
                               SyntheticLogisticStream, write_svmlight)

BASE = """
[topology]
kind = "ring"
m = 3
scheme = "metropolis"
scale = "auto"

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

[noise]
sigma = 1.0
varsigma = 0.1

[stream]
kind = "synthetic_linear"
theta_true = [0.5, -0.3]
feature_bound = 1.0
label_noise = 0.1

[run]
horizon = 100
seed = 3
"""


@pytest.fixture
def base_path(tmp_path):
    p = tmp_path / "base.toml"
    p.write_text(BASE)
    return str(p)


def test_load_full_config(base_path):
    cfg = load_config(base_path)
    assert cfg.m == 3 and cfg.dim == 2
    assert isinstance(cfg.problem.loss, RidgeLoss)
    assert isinstance(cfg.stream, SyntheticLinearStream)
    assert cfg.schedules.lambda0 == 0.001
    assert cfg.horizon == 100 and cfg.seed == 3 and cfg.replicates == 1
    assert len(cfg.noise) == 3
    assert cfg.validate() == []


def test_derived_ridge_constants(base_path):
    cfg = load_config(base_path)
    # label bound defaults to B * ||theta_true||_1 + 4 * label_noise
    expect = ridge_constants(0.5, 1.0, 1.0, 0.8 + 0.4, 2)
    assert (cfg.problem.mu, cfg.problem.lipschitz, cfg.problem.grad_bound,
            cfg.problem.kappa_sq, cfg.problem.l1_clip) == expect


def test_explicit_constants_override_derived(base_path):
    cfg = load_config(base_path, overrides=["problem.l1_clip=9.5",
                                            "problem.mu=0.3"])
    assert cfg.problem.l1_clip == 9.5
    assert cfg.problem.mu == 0.3
    # untouched constants still come from the derivation
    ref = ridge_constants(0.5, 1.0, 1.0, 1.2, 2)
    assert cfg.problem.lipschitz == ref[1]


def test_parse_override_typing():
    assert parse_override("run.seed=3") == (["run", "seed"], 3)
    assert parse_override('stream.kind="file"') == (["stream", "kind"], "file")
    assert parse_override("noise.sigma=[1.0, 2.0]") == \
        (["noise", "sigma"], [1.0, 2.0])
    assert parse_override("schedules.gamma0=0.25") == \
        (["schedules", "gamma0"], 0.25)
    # bare words fall back to strings
    assert parse_override("topology.scale=auto") == \
        (["topology", "scale"], "auto")


def test_parse_override_errors():
    for bad in ("no_equals", "=3", "a..b=1", "x=[1,"):
        with pytest.raises(ConfigError):
            parse_override(bad)


def test_apply_overrides_creates_sections():
    doc = {"run": {"seed": 1}}
    apply_overrides(doc, ["run.seed=2", "extra.flag=true"])
    assert doc["run"]["seed"] == 2
    assert doc["extra"]["flag"] is True
    with pytest.raises(ConfigError):
        apply_overrides({"run": {"seed": 1}}, ["run.seed.sub=2"])


def test_overrides_change_built_config(base_path):
    cfg = load_config(base_path, overrides=["run.horizon=50",
                                            "schedules.lambda0=0.002",
                                            "noise.varsigma=0.12"])
    assert cfg.horizon == 50
    assert cfg.schedules.lambda0 == 0.002
    assert all(ns.varsigma == 0.12 for ns in cfg.noise)


def test_per_learner_noise_lists(base_path):
    cfg = load_config(base_path, overrides=[
        "noise.sigma=[1.0, 2.0, 3.0]", "noise.varsigma=[0.1, 0.11, 0.12]"])
    assert [ns.sigma for ns in cfg.noise] == [1.0, 2.0, 3.0]
    with pytest.raises(ConfigError, match="per learner"):
        load_config(base_path, overrides=["noise.sigma=[1.0, 2.0]"])


def test_error_aggregation_lists_every_problem(base_path):
    with pytest.raises(ConfigError) as err:
        load_config(base_path, overrides=["run.horizon=0",
                                          "schedules.u=1.5",
                                          "domain.radius=-1"])
    msg = str(err.value)
    assert "[run]" in msg and "[schedules]" in msg and "[domain]" in msg


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_toml(tmp_path / "nope.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[run\nhorizon = 1")
    with pytest.raises(ConfigError):
        load_toml(bad)


def test_explicit_topology_entries(base_path):
    cfg = load_config(base_path, overrides=[
        'topology.kind="explicit"',
        "topology.entries=[[-0.4, 0.4], [0.4, -0.4]]"])
    assert cfg.m == 2
    np.testing.assert_allclose(cfg.weights.entries,
                               [[-0.4, 0.4], [0.4, -0.4]])


def test_unknown_kinds_rejected(base_path):
    for ov in ('topology.kind="torus"', 'domain.kind="simplex"',
               'stream.kind="mystery"', 'problem.loss="hinge"'):
        with pytest.raises(ConfigError):
            load_config(base_path, overrides=[ov])


def test_box_domain(base_path):
    cfg = load_config(base_path, overrides=[
        'domain.kind="box"', "domain.lo=[-1.0, -1.0]", "domain.hi=[1.0, 1.0]"])
    assert cfg.projection.kind == "box"
    assert cfg.projection.dim == 2


def test_logistic_config(base_path):
    cfg = load_config(base_path, overrides=[
        'problem.loss="logistic"', "problem.r=0.1",
        'stream.kind="synthetic_logistic"'])
    assert isinstance(cfg.problem.loss, LogisticLoss)
    assert isinstance(cfg.stream, SyntheticLogisticStream)
    ref = logistic_constants(0.1, 1.0, 1.0, 2)
    assert cfg.problem.mu == ref[0] and cfg.problem.l1_clip == ref[4]
    assert cfg.resolved_engine() == "replay"


def test_file_stream_config(tmp_path, base_path):
    data = tmp_path / "train.svm"
    rng = np.random.default_rng(0)
    write_svmlight(data, rng.uniform(-1, 1, (9, 2)), rng.integers(1, 3, 9))
    cfg = load_config(base_path, overrides=[
        'stream.kind="file"', f'stream.path="{data}"',
        'stream.label_map={"1" = 0.0, "2" = 1.0}'])
    assert isinstance(cfg.stream, FileStream)
    assert cfg.stream.m == 3
    assert set(np.unique(cfg.stream.y)) <= {0.0, 1.0}
    with pytest.raises(ConfigError, match="stream"):
        load_config(base_path, overrides=[
            'stream.kind="file"', f'stream.path="{tmp_path}/absent.svm"'])


def test_run_section_flags(base_path):
    cfg = load_config(base_path, overrides=[
        "run.checkpoints=[0, 10, 100]", 'run.engine="replay"',
        "run.noise_on=false", "run.record_dynamic=true"])
    assert cfg.resolved_checkpoints() == [0, 10, 100]
    assert cfg.resolved_engine() == "replay"
    assert not cfg.noise_on and cfg.record_dynamic


def test_build_config_cross_checks():
    doc = {"topology": {"kind": "ring", "m": 2},
           "domain": {"kind": "ball", "center": [0.0], "radius": 1.0},
           "problem": {"loss": "ridge", "alpha": 0.5},
           "stream": {"kind": "synthetic_linear", "theta_true": [0.5, 0.5],
                      "feature_bound": 1.0},
           "run": {"horizon": 10}}
    with pytest.raises(ConfigError, match="dim"):
        build_config(doc)


def test_repository_configs_all_load():
    import glob
    paths = glob.glob("configs/*.toml")
    assert paths
    for p in paths:
        cfg = load_config(p)
        assert cfg.validate() == []
