"""Historical-average gradient engines.

Each engine computes d_t(theta) = (1/(t+1)) * sum_{k<=t} grad l(theta, xi_k)
for a growing sample history, three ways:

ReplayMemory     -- exact, stores every sample, O(t) per evaluation.
AffineAggregate  -- exact for ridge, O(n^2) state independent of t, using the
                    fact that the per-sample ridge gradient is affine in theta.
InterpEngine     -- the constant-memory two-point-interpolation approximation;
                    exact whenever the per-sample gradient is affine in a
                    single parameter coordinate, a diagnostic otherwise.

All engines share the ``observe(theta, x, y) -> d_t(theta)`` step used by the
learner: append the round's sample, then evaluate the running average at the
current parameter.
"""

from __future__ import annotations

import numpy as np

from .objectives import clip_l1_rows


class ReplayMemory:
    """Exact replay of the full sample history."""

    def __init__(self, loss, dim: int, clip: float = None):
        self.loss = loss
        self.dim = dim
        self.clip = clip
        self._xs = []
        self._ys = []
        self._X = None  # packed cache, invalidated on append

    @property
    def count(self) -> int:
        return len(self._xs)

    def append(self, x, y):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected dim {self.dim}, got {x.shape}")
        self._xs.append(x)
        self._ys.append(float(y))
        self._X = None

    def _packed(self):
        if self._X is None:
            self._X = (np.array(self._xs), np.array(self._ys))
        return self._X

    def avg_grad(self, theta):
        if not self._xs:
            raise ValueError("empty memory")
        X, Y = self._packed()
        G = self.loss.grad_batch(np.asarray(theta, dtype=float), X, Y)
        if self.clip is not None:
            G = clip_l1_rows(G, self.clip)
        return G.mean(axis=0)

    def observe(self, theta, x, y):
        self.append(x, y)
        return self.avg_grad(theta)


class AffineAggregate:
    """Sufficient statistics for the ridge running-average gradient.

    Per-sample ridge gradient is A_k theta + b_k with A_k = 2 x_k x_k^T + 2aI
    and b_k = -2 x_k y_k, so the average at any theta is one matrix-vector
    product on the accumulated sums. No per-sample clipping is possible here;
    use it only when the configured clip bound is certified inactive.
    """

    def __init__(self, alpha: float, dim: int):
        self.alpha = float(alpha)
        self.dim = dim
        self.A_sum = np.zeros((dim, dim))
        self.b_sum = np.zeros(dim)
        self.count = 0

    def append(self, x, y):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected dim {self.dim}, got {x.shape}")
        self.A_sum += 2.0 * np.outer(x, x)
        self.A_sum[np.diag_indices(self.dim)] += 2.0 * self.alpha
        self.b_sum += -2.0 * x * y
        self.count += 1

    def avg_grad(self, theta):
        if self.count == 0:
            raise ValueError("empty memory")
        return (self.A_sum @ np.asarray(theta, dtype=float) + self.b_sum) / self.count

    def observe(self, theta, x, y):
        self.append(x, y)
        return self.avg_grad(theta)


class InterpEngine:
    """Two-point-interpolation approximation of the running average.

    Round t >= 2 estimates d_{t-1} at the new iterate from its stored values
    at the two previous iterates, coordinate by coordinate, then folds in the
    fresh gradient by the running-mean identity. The first two rounds are
    computed exactly as warm-up. Coordinates where the two previous iterates
    coincide (within tie_tol) fall back to the latest stored value.
    """

    def __init__(self, loss, dim: int, tie_tol: float = 1e-12):
        self.loss = loss
        self.dim = dim
        self.tie_tol = tie_tol
        self.count = 0
        self._theta_p = None   # theta_{t-1}
        self._theta_pp = None  # theta_{t-2}
        self._d_p = None       # d_{t-1}(theta_{t-1})
        self._d_pp = None      # d_{t-2}(theta_{t-2})
        self._sample_p = None  # xi_{t-1}
        self._warmup = []      # samples retained only during warm-up

    def observe(self, theta, x, y):
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x, dtype=float)
        t = self.count
        if t == 0:
            d = self.loss.grad(theta, x, y)
            self._warmup = [(x, float(y))]
        elif t == 1:
            # exact average over both samples at the current iterate
            (x0, y0), = self._warmup
            d = 0.5 * (self.loss.grad(theta, x0, y0) + self.loss.grad(theta, x, y))
            self._warmup = []
        else:
            xp, yp = self._sample_p
            cross = (self._d_pp * (t - 1) + self.loss.grad(self._theta_pp, xp, yp)) / t
            denom = self._theta_p - self._theta_pp
            tie = np.abs(denom) < self.tie_tol
            w = np.where(tie, 1.0, (theta - self._theta_pp) / np.where(tie, 1.0, denom))
            d_prev_here = np.where(tie, self._d_p, w * self._d_p + (1.0 - w) * cross)
            d = (d_prev_here * t + self.loss.grad(theta, x, y)) / (t + 1)
        self._theta_pp, self._d_pp = self._theta_p, self._d_p
        self._theta_p, self._d_p = theta.copy(), np.asarray(d, dtype=float)
        self._sample_p = (x, float(y))
        self.count = t + 1
        return d


def make_engine(kind: str, loss, dim: int, clip: float = None):
    if kind == "replay":
        return ReplayMemory(loss, dim, clip=clip)
    if kind == "affine":
        if not hasattr(loss, "alpha"):
            raise ValueError("affine engine requires a ridge loss")
        return AffineAggregate(loss.alpha, dim)
    if kind == "interp":
        return InterpEngine(loss, dim)
    raise ValueError(f"unknown gradient engine {kind!r}")
