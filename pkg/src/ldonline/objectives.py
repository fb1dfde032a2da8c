"""Loss families, gradients, and the problem constants the theory consumes.

Two loss families are provided: scalar-target ridge regression and
l2-regularized logistic regression. Each exposes single-sample and batched
loss/gradient evaluation; the batched forms are what the simulator and the
ERM oracle actually run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class Sample:
    """One labelled observation: feature vector x and scalar label y."""

    x: np.ndarray
    y: float


class RidgeLoss:
    """l(theta, (x, y)) = (y - x.theta)^2 + alpha * theta.theta"""

    def __init__(self, alpha: float):
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.alpha = float(alpha)

    def loss(self, theta, x, y):
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x, dtype=float)
        if x.shape != theta.shape:
            raise ValueError(f"dimension mismatch: {x.shape} vs {theta.shape}")
        r = y - x @ theta
        return float(r * r + self.alpha * theta @ theta)

    def grad(self, theta, x, y):
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x, dtype=float)
        if x.shape != theta.shape:
            raise ValueError(f"dimension mismatch: {x.shape} vs {theta.shape}")
        return -2.0 * x * (y - x @ theta) + 2.0 * self.alpha * theta

    def loss_batch(self, theta, X, Y):
        r = Y - X @ theta
        return r * r + self.alpha * (theta @ theta)

    def grad_batch(self, theta, X, Y):
        """Per-sample gradients, one row per sample."""
        r = Y - X @ theta
        return -2.0 * X * r[:, None] + 2.0 * self.alpha * theta


class LogisticLoss:
    """l2-logistic loss with sigmoid s(a) = 1 / (1 + exp(-a)).

    l(theta, (a, b)) = (1 - b) a.theta - log s(a.theta) + (r/2) ||theta||^2
    for binary label b in {0, 1}.
    """

    def __init__(self, r: float = 0.0):
        if r < 0:
            raise ValueError("r must be >= 0")
        self.r = float(r)

    @staticmethod
    def _check_label(b):
        if b not in (0, 1, 0.0, 1.0):
            raise ValueError(f"label must be 0 or 1, got {b!r}")

    @staticmethod
    def _log_sigmoid(z):
        # -log(1 + e^{-z}) without overflow on either tail
        z = np.asarray(z, dtype=float)
        return np.where(z >= 0, -np.log1p(np.exp(-np.abs(z))),
                        z - np.log1p(np.exp(-np.abs(z))))

    def loss(self, theta, x, y):
        self._check_label(y)
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x, dtype=float)
        z = x @ theta
        return float((1.0 - y) * z - self._log_sigmoid(z)
                     + 0.5 * self.r * theta @ theta)

    def grad(self, theta, x, y):
        self._check_label(y)
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x, dtype=float)
        return (expit(x @ theta) - y) * x + self.r * theta

    def loss_batch(self, theta, X, Y):
        z = X @ theta
        return (1.0 - Y) * z - self._log_sigmoid(z) + 0.5 * self.r * (theta @ theta)

    def grad_batch(self, theta, X, Y):
        z = X @ theta
        return (expit(z) - Y)[:, None] * X + self.r * theta


def clip_l1(g, C: float):
    """Scale g down so its 1-norm is at most C; direction is preserved."""
    if C <= 0:
        raise ValueError("C must be > 0")
    g = np.asarray(g, dtype=float)
    n1 = np.abs(g).sum()
    if n1 <= C:
        return g
    return g * (C / n1)


def clip_l1_rows(G, C: float):
    """Row-wise l1 clip of a stack of gradients."""
    if C <= 0:
        raise ValueError("C must be > 0")
    G = np.asarray(G, dtype=float)
    n1 = np.abs(G).sum(axis=1)
    factor = np.minimum(1.0, C / np.maximum(n1, 1e-300))
    return G * factor[:, None]


@dataclass(frozen=True)
class ProblemSpec:
    """Loss family plus the constants every theorem condition consumes.

    mu:         strong-convexity modulus of the population objectives
    lipschitz:  Lipschitz constant L of the stochastic gradients
    grad_bound: D, uniform bound on ||grad f_i|| over the domain
    kappa_sq:   variance bound of the stochastic gradient noise
    l1_clip:    C, 1-norm gradient bound enforced (or certified) for privacy
    domain:     projection set (see ldonline.learner.ProjectionSet)
    """

    loss: object
    mu: float
    lipschitz: float
    grad_bound: float
    kappa_sq: float
    l1_clip: float
    domain: object = None

    def __post_init__(self):
        if self.mu < 0 or self.lipschitz <= 0:
            raise ValueError("need mu >= 0 and L > 0")
        if self.mu > self.lipschitz + 1e-12:
            raise ValueError(f"mu={self.mu} exceeds L={self.lipschitz}")
        if self.grad_bound <= 0 or self.kappa_sq < 0 or self.l1_clip <= 0:
            raise ValueError("need D > 0, kappa^2 >= 0, C > 0")


def ridge_constants(alpha, feature_bound, radius, label_bound, dim):
    """Conservative (mu, L, D, kappa^2, C) for ridge on a centered ball.

    feature_bound bounds each coordinate of x; radius is the ball radius;
    label_bound bounds |y|. The bounds are worst-case over the domain, not
    tight, which is the right direction for both the theorem checkers and
    the privacy accountant.
    """
    B, R, Y, n = float(feature_bound), float(radius), float(label_bound), int(dim)
    xnorm = B * math.sqrt(n)            # ||x||_2 <= B sqrt(n)
    mu = 2.0 * alpha
    L = 2.0 * (xnorm ** 2 + alpha)
    resid = Y + xnorm * R               # |y - x.theta| bound
    D = 2.0 * xnorm * resid + 2.0 * alpha * R
    kappa_sq = D ** 2                   # deviation no larger than 2x the mean bound scale
    C = 2.0 * n * B * resid + 2.0 * alpha * math.sqrt(n) * R
    return mu, L, D, kappa_sq, C


def logistic_constants(r, feature_bound, radius, dim):
    """Conservative (mu, L, D, kappa^2, C) for l2-logistic on a centered ball."""
    B, R, n = float(feature_bound), float(radius), int(dim)
    xnorm = B * math.sqrt(n)
    mu = r
    L = xnorm ** 2 / 4.0 + r
    D = xnorm + r * R                   # |s - b| <= 1
    kappa_sq = D ** 2
    C = n * B + r * math.sqrt(n) * R
    return mu, L, D, kappa_sq, C
