"""Oracles for the time-varying optimum and the error metrics built on it.

The running empirical risk at round t averages all samples received so far
across all learners. Its minimizer over the domain is the comparator for both
the tracking error (max over learners of mean squared distance) and the
instantaneous regret (max over learners of the mean objective gap).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def ridge_optimum(Sxx, Sxy, count, alpha, projection=None,
                  polish_tol: float = 1e-10):
    """Minimizer of the running ridge risk from its sufficient statistics.

    Solves (sum xx^T + N alpha I) theta = sum x y; if the unconstrained
    solution leaves the domain, polishes with projected gradient descent
    (projection of the unconstrained minimizer is not the constrained
    minimizer in general).
    """
    Sxx = np.asarray(Sxx, dtype=float)
    n = Sxx.shape[0]
    A = Sxx + count * alpha * np.eye(n)
    if alpha == 0 and np.linalg.cond(A) > 1e14:
        raise np.linalg.LinAlgError("singular ridge system with alpha = 0")
    theta = np.linalg.solve(A, Sxy)
    if projection is None or projection.contains(theta):
        return theta
    # constrained case: minimize theta^T A theta / N - 2 theta . Sxy / N over the set
    grad = lambda th: 2.0 * (A @ th - Sxy) / count
    lip = 2.0 * np.linalg.eigvalsh(A)[-1] / count
    theta = projection.project(theta)
    return _projected_gradient(grad, theta, projection, lip, tol=polish_tol)


def logistic_optimum(loss, X, Y, projection, theta0=None, tol: float = 1e-9,
                     max_iters: int = 20000):
    """Constrained minimizer of the running logistic risk by projected gradient.

    Uses Nesterov momentum with gradient restart; warm-startable via theta0.
    First-order optimality residual at return is below tol (or max_iters hit).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    count, n = X.shape
    theta = (np.zeros(n) if theta0 is None
             else projection.project(np.asarray(theta0, dtype=float)))
    lip = float(np.linalg.norm(X, ord=2) ** 2) / (4.0 * count) + loss.r

    def grad(th):
        return loss.grad_batch(th, X, Y).mean(axis=0)

    return _projected_gradient(grad, theta, projection, lip, tol=tol,
                               max_iters=max_iters, momentum=True)


def _projected_gradient(grad, theta, projection, lip, tol=1e-9,
                        max_iters=20000, momentum=False):
    eta = 1.0 / lip
    y = theta.copy()
    t_acc = 1.0
    for _ in range(max_iters):
        g = grad(y)
        theta_new = projection.project(y - eta * g)
        residual = np.linalg.norm(theta_new - projection.project(
            theta_new - eta * grad(theta_new))) / eta
        if momentum:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_acc * t_acc))
            y = theta_new + (t_acc - 1.0) / t_next * (theta_new - theta)
            # restart momentum when it points uphill
            if np.dot(g, theta_new - theta) > 0:
                y = theta_new
                t_next = 1.0
            t_acc = t_next
        else:
            y = theta_new
        theta = theta_new
        if residual <= tol:
            break
    return theta


def tracking_error(sq_dists):
    """V_t: max over learners of the replicate-mean squared distance.

    sq_dists has shape (replicates, learners) for one round.
    """
    return float(np.max(np.mean(np.asarray(sq_dists, dtype=float), axis=0)))


def instantaneous_regret(gaps):
    """R_t: max over learners of the replicate-mean objective gap."""
    return float(np.max(np.mean(np.asarray(gaps, dtype=float), axis=0)))


def dynamic_regret(per_round_losses, per_round_optimal_losses):
    """Cumulative loss gap: sum over learners and rounds of l(theta) - l(theta*).

    Both inputs have shape (rounds, learners).
    """
    a = np.asarray(per_round_losses, dtype=float)
    b = np.asarray(per_round_optimal_losses, dtype=float)
    if a.shape != b.shape:
        raise ValueError("mismatched trace shapes")
    return float((a - b).sum())


@dataclass(frozen=True)
class DriftReport:
    max_scaled_drift: float     # sup over the window of t^2 ||theta*_{t+1} - theta*_t||^2
    slope: float                # log-log slope of drift vs t
    slope_halfwidth: float


def drift_check(optima, start_round: int = 1) -> DriftReport:
    """Quantify how fast the running optimum settles.

    optima[t] is theta*_t for consecutive rounds starting at start_round.
    """
    optima = np.asarray(optima, dtype=float)
    if optima.ndim == 1:
        optima = optima[:, None]
    drifts = np.sum(np.diff(optima, axis=0) ** 2, axis=1)
    ts = np.arange(start_round, start_round + len(drifts), dtype=float)
    scaled = ts ** 2 * drifts
    positive = drifts > 0
    if positive.sum() >= 5:
        slope, half = rate_fit(ts[positive], drifts[positive])
    else:
        slope, half = math.nan, math.nan
    return DriftReport(float(scaled.max()), slope, half)


def drift_constant(kappa_sq, grad_bound, mu, lipschitz) -> float:
    """Coefficient of the t^{-2} bound on the squared optimum drift."""
    return (16.0 * (kappa_sq + grad_bound ** 2)
            * (2.0 / mu ** 2 + 1.0 / lipschitz ** 2))


def rate_fit(ts, values, window=None):
    """Least-squares slope of log(value) vs log(t) with its standard error.

    window, if given, restricts to ts in [window[0], window[1]].
    """
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is not None:
        mask = (ts >= window[0]) & (ts <= window[1])
        ts, values = ts[mask], values[mask]
    if len(ts) < 5:
        raise ValueError("need at least 5 points for a rate fit")
    if np.any(values <= 0) or np.any(ts <= 0):
        raise ValueError("rate fit requires positive values and rounds")
    x = np.log(ts)
    y = np.log(values)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    dof = len(x) - 2
    if dof > 0 and res.size:
        sigma2 = float(res[0]) / dof
        sx = float(np.sum((x - x.mean()) ** 2))
        half = math.sqrt(sigma2 / sx)
    else:
        half = 0.0
    return slope, half
