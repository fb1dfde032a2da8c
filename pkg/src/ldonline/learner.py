"""Per-learner state machine: one round of the private consensus update.

A learner only ever sees noisy neighbor broadcasts; clean neighbor states are
structurally unreachable from here, which is the trust boundary the local
privacy model requires. The round is:

    dhat   = running-average gradient at the current parameter
    theta' = theta + gamma_t * sum_j w_ij (msg_j - theta) - lambda_t * dhat
    theta  = project(theta')
    emit theta + fresh Laplace noise
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .objectives import clip_l1
from .privacy import NoiseSchedule, sample_laplace


@dataclass(frozen=True)
class ProjectionSet:
    """Convex compact parameter domain: Euclidean ball or axis-aligned box."""

    kind: str
    center: np.ndarray = None
    radius: float = None
    lo: np.ndarray = None
    hi: np.ndarray = None

    def __post_init__(self):
        if self.kind == "ball":
            if self.radius is None or self.radius <= 0:
                raise ValueError("ball needs radius > 0")
            object.__setattr__(self, "center",
                               np.asarray(self.center, dtype=float))
        elif self.kind == "box":
            lo = np.asarray(self.lo, dtype=float)
            hi = np.asarray(self.hi, dtype=float)
            if not np.all(lo < hi):
                raise ValueError("box needs lo < hi componentwise")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        else:
            raise ValueError(f"unknown projection set kind {self.kind!r}")

    @property
    def diameter(self) -> float:
        if self.kind == "ball":
            return 2.0 * self.radius
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def dim(self) -> int:
        return len(self.center) if self.kind == "ball" else len(self.lo)

    def project(self, v: np.ndarray) -> np.ndarray:
        """Euclidean projection; idempotent, identity on interior points."""
        v = np.asarray(v, dtype=float)
        if self.kind == "box":
            return np.clip(v, self.lo, self.hi)
        d = v - self.center
        norm = np.linalg.norm(d)
        if norm <= self.radius:
            return v
        return self.center + d * (self.radius / norm)

    def project_rows(self, V: np.ndarray) -> np.ndarray:
        V = np.asarray(V, dtype=float)
        if self.kind == "box":
            return np.clip(V, self.lo, self.hi)
        D = V - self.center
        norms = np.linalg.norm(D, axis=1)
        factor = np.minimum(1.0, self.radius / np.maximum(norms, 1e-300))
        return self.center + D * factor[:, None]

    def contains(self, v, tol: float = 1e-12) -> bool:
        v = np.asarray(v, dtype=float)
        if self.kind == "box":
            return bool(np.all(v >= self.lo - tol) and np.all(v <= self.hi + tol))
        return bool(np.linalg.norm(v - self.center) <= self.radius + tol)

    def sample_uniform(self, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "box":
            return rng.uniform(self.lo, self.hi)
        n = self.dim
        direction = rng.standard_normal(n)
        direction /= np.linalg.norm(direction)
        r = self.radius * rng.random() ** (1.0 / n)
        return self.center + r * direction


def project(projection: ProjectionSet, v):
    return projection.project(v)


@dataclass
class LearnerState:
    id: int
    theta: np.ndarray
    memory: object
    projection: ProjectionSet
    clip: float = None
    round: int = 0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if not self.projection.contains(self.theta):
            raise ValueError("initial parameter outside the domain")


def local_update(state: LearnerState, sample_x, sample_y, neighbor_msgs,
                 gamma_t: float, lambda_t: float) -> LearnerState:
    """One round: absorb the sample, mix with noisy messages, descend, project.

    neighbor_msgs is a list of (w_ij, message) pairs; messages already carry
    the senders' noise.
    """
    d = state.memory.observe(state.theta, sample_x, sample_y)
    if state.clip is not None:
        d = clip_l1(d, state.clip)
    mix = np.zeros_like(state.theta)
    for w, msg in neighbor_msgs:
        if w <= 0:
            raise ValueError("neighbor weights must be positive")
        mix += w * (np.asarray(msg, dtype=float) - state.theta)
    theta_hat = state.theta + gamma_t * mix - lambda_t * d
    state.theta = state.projection.project(theta_hat)
    state.round += 1
    return state


def make_broadcast(state: LearnerState, schedule: NoiseSchedule,
                   rng: np.random.Generator, noise_on: bool = True) -> np.ndarray:
    """Noisy message for the learner's current round; clean theta never leaves."""
    if not noise_on:
        return state.theta.copy()
    _, nu = schedule.scales(state.round)
    return state.theta + sample_laplace(nu, len(state.theta), rng)
