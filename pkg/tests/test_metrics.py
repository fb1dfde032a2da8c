"""ERM oracles against scipy references, rate fits, drift summaries."""

import numpy as np
import pytest
from scipy.optimize import minimize

from ldonline.learner import ProjectionSet
from ldonline.metrics import (DriftReport, drift_check, drift_constant,
                              dynamic_regret, instantaneous_regret,
                              logistic_optimum, rate_fit, ridge_optimum,
                              tracking_error)
from ldonline.objectives import LogisticLoss, RidgeLoss


def _ball(n, radius=1.0):
    return ProjectionSet(kind="ball", center=np.zeros(n), radius=radius)


def test_ridge_optimum_unconstrained_normal_equations():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 3))
    Y = rng.normal(size=200)
    alpha = 0.4
    Sxx, Sxy = X.T @ X, X.T @ Y
    theta = ridge_optimum(Sxx, Sxy, len(Y), alpha, projection=_ball(3, 50.0))
    A = Sxx + len(Y) * alpha * np.eye(3)
    resid = np.linalg.norm(A @ theta - Sxy) / np.linalg.norm(Sxy)
    assert resid <= 1e-10


def test_ridge_optimum_constrained_matches_scipy():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(100, 2)) + 1.0
    Y = X @ np.array([2.0, -1.5]) + 0.1 * rng.normal(size=100)
    alpha = 0.01
    ps = _ball(2, 0.8)   # active constraint: true solution far outside
    Sxx, Sxy, Syy = X.T @ X, X.T @ Y, Y @ Y
    theta = ridge_optimum(Sxx, Sxy, len(Y), alpha, projection=ps)
    assert ps.contains(theta)

    def obj(th):
        return float((Syy - 2 * th @ Sxy + th @ Sxx @ th) / len(Y)
                     + alpha * th @ th)

    ref = minimize(obj, np.zeros(2), method="SLSQP",
                   constraints=[{"type": "ineq",
                                 "fun": lambda th: 0.8 ** 2 - th @ th}],
                   options={"ftol": 1e-14, "maxiter": 500})
    assert obj(theta) <= obj(ref.x) + 1e-9


def test_ridge_optimum_singular_without_regularization():
    Sxx = np.array([[1.0, 1.0], [1.0, 1.0]])   # rank deficient
    with pytest.raises(np.linalg.LinAlgError):
        ridge_optimum(Sxx, np.ones(2), 10, 0.0)


def test_logistic_optimum_matches_scipy():
    rng = np.random.default_rng(2)
    X = rng.uniform(-1, 1, size=(150, 2))
    theta_true = np.array([1.5, -1.0])
    Y = (rng.random(150) < 1.0 / (1.0 + np.exp(-X @ theta_true))).astype(float)
    loss = LogisticLoss(0.05)
    ps = _ball(2, 1.0)
    theta = logistic_optimum(loss, X, Y, ps, tol=1e-10)
    assert ps.contains(theta)

    def obj(th):
        return float(loss.loss_batch(th, X, Y).mean())

    ref = minimize(obj, np.zeros(2), method="SLSQP",
                   constraints=[{"type": "ineq",
                                 "fun": lambda th: 1.0 - th @ th}],
                   options={"ftol": 1e-14, "maxiter": 500})
    assert obj(theta) <= obj(ref.x) + 1e-9


def test_logistic_optimum_warm_start_consistent():
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, size=(80, 2))
    Y = (rng.random(80) < 0.5).astype(float)
    loss = LogisticLoss(0.1)
    ps = _ball(2, 2.0)
    cold = logistic_optimum(loss, X, Y, ps, tol=1e-11)
    warm = logistic_optimum(loss, X, Y, ps, theta0=cold + 0.01, tol=1e-11)
    np.testing.assert_allclose(cold, warm, atol=1e-7)


def test_tracking_and_regret_reductions():
    sq = np.array([[1.0, 4.0], [3.0, 2.0]])   # replicates x learners
    assert tracking_error(sq) == pytest.approx(3.0)   # max of means (2, 3)
    gaps = np.array([[0.1, 0.0], [0.3, 0.4]])
    assert instantaneous_regret(gaps) == pytest.approx(0.2)


def test_dynamic_regret_sum():
    own = np.array([[1.0, 2.0], [2.0, 1.0]])
    star = np.array([[0.5, 1.5], [1.5, 0.5]])
    assert dynamic_regret(own, star) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        dynamic_regret(own, star[:1])


def test_rate_fit_recovers_exact_power_law():
    ts = np.logspace(1, 4, 30)
    vals = 3.7 * ts ** -1.25
    slope, half = rate_fit(ts, vals)
    assert slope == pytest.approx(-1.25, abs=1e-12)
    assert half == pytest.approx(0.0, abs=1e-10)
    slope_w, _ = rate_fit(ts, vals * np.exp(0.01 * np.random.default_rng(0).normal(size=30)),
                          window=(100, 10_000))
    assert slope_w == pytest.approx(-1.25, abs=0.05)


def test_rate_fit_input_validation():
    with pytest.raises(ValueError):
        rate_fit([1, 2, 3], [1, 1, 1])              # too few points
    with pytest.raises(ValueError):
        rate_fit([1, 2, 3, 4, 5], [1, 1, 0, 1, 1])  # nonpositive value


def test_drift_check_on_synthetic_power_law():
    ts = np.arange(1, 2000)
    # optimum drifting by exactly c/t per step: drift^2 = c^2 t^-2
    c = 0.3
    steps = c / ts
    optima = np.concatenate([[0.0], np.cumsum(steps)])
    report = drift_check(optima, start_round=1)
    assert isinstance(report, DriftReport)
    assert report.slope == pytest.approx(-2.0, abs=1e-6)
    assert report.max_scaled_drift == pytest.approx(c * c, rel=1e-9)


def test_drift_constant_formula():
    val = drift_constant(kappa_sq=2.0, grad_bound=3.0, mu=0.5, lipschitz=2.0)
    assert val == pytest.approx(16.0 * 11.0 * (8.0 + 0.25))
