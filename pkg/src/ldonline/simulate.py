"""Synchronous multi-learner simulation of the private online learning loop.

A round is a two-phase barrier: every broadcast for round t is formed from
round-t states before any round-(t+1) update begins. Learners read only the
noisy message set; clean neighbor states never cross the learner boundary.

Two execution paths produce identical dynamics (up to floating-point
summation order): a per-learner reference path built on
:mod:`ldonline.learner`, and a vectorized fast path for ridge losses with the
affine gradient engine, which is what makes 10^5-round runs with tens of
replicates cheap.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from . import metrics, privacy, rngstream
from .learner import LearnerState, ProjectionSet, local_update
from .memory import make_engine
from .objectives import LogisticLoss, RidgeLoss, clip_l1_rows


class SimulationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# data streams


@dataclass(frozen=True)
class SyntheticLinearStream:
    """x uniform in [-B, B]^n, y = x . theta_true + Gaussian(0, s^2)."""

    theta_true: tuple
    feature_bound: float
    label_noise: float

    @property
    def dim(self) -> int:
        return len(self.theta_true)

    def draw(self, seed, replicate, learner, rounds):
        gen = rngstream.stream(seed, replicate, learner, rngstream.PURPOSE_DATA)
        B = self.feature_bound
        X = gen.uniform(-B, B, size=(rounds, self.dim))
        theta = np.asarray(self.theta_true, dtype=float)
        y = X @ theta
        if self.label_noise > 0:
            y = y + self.label_noise * gen.standard_normal(rounds)
        return X, y


@dataclass(frozen=True)
class SyntheticLogisticStream:
    """x uniform in [-B, B]^n, binary label with P(y=1) = sigmoid(x . theta_true)."""

    theta_true: tuple
    feature_bound: float

    @property
    def dim(self) -> int:
        return len(self.theta_true)

    def draw(self, seed, replicate, learner, rounds):
        gen = rngstream.stream(seed, replicate, learner, rngstream.PURPOSE_DATA)
        B = self.feature_bound
        X = gen.uniform(-B, B, size=(rounds, self.dim))
        p = expit(X @ np.asarray(self.theta_true, dtype=float))
        y = (gen.random(rounds) < p).astype(float)
        return X, y


@dataclass(frozen=True)
class FileStream:
    """Fixed dataset partitioned round-robin across learners, cycled as needed."""

    X: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    m: int = 1

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def draw(self, seed, replicate, learner, rounds):
        rows = np.arange(learner, len(self.y), self.m)
        if len(rows) == 0:
            raise SimulationError(f"no rows assigned to learner {learner}")
        idx = rows[np.arange(rounds) % len(rows)]
        return self.X[idx], self.y[idx]


def load_svmlight(path, label_map=None, scale_features: bool = False):
    """Parse an svmlight/libsvm text file into dense arrays.

    Lines look like ``label idx:val idx:val ...`` with 1-based indices.
    label_map remaps raw labels (e.g. {1: 0, 2: 1}); scale_features rescales
    each feature column to [0, 1].
    """
    labels, rows = [], []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                raw = float(parts[0])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad label {parts[0]!r}")
            entries = {}
            for tok in parts[1:]:
                try:
                    idx_s, val_s = tok.split(":")
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad entry {tok!r}")
                if idx < 1:
                    raise ValueError(f"{path}:{lineno}: index {idx} not 1-based")
                entries[idx] = val
                max_idx = max(max_idx, idx)
            labels.append(raw)
            rows.append(entries)
    if not rows:
        raise ValueError(f"{path}: empty stream")
    X = np.zeros((len(rows), max_idx))
    for r, entries in enumerate(rows):
        for idx, val in entries.items():
            X[r, idx - 1] = val
    y = np.array(labels)
    if label_map is not None:
        mapped = np.empty_like(y)
        for r, raw in enumerate(y):
            key = int(raw) if float(raw).is_integer() else raw
            if key not in label_map:
                raise ValueError(f"{path}: unmapped label {raw!r}")
            mapped[r] = label_map[key]
        y = mapped
    if scale_features:
        lo = X.min(axis=0)
        span = np.maximum(X.max(axis=0) - lo, 1e-300)
        X = (X - lo) / span
    return X, y


def write_svmlight(path, X, y):
    """Inverse of load_svmlight, for round-trip tests and fixtures."""
    with open(path, "w") as fh:
        for row, label in zip(np.asarray(X), np.asarray(y)):
            toks = [f"{label:.17g}"]
            toks += [f"{j + 1}:{val:.17g}" for j, val in enumerate(row) if val != 0.0]
            fh.write(" ".join(toks) + "\n")


# ---------------------------------------------------------------------------
# configuration and trace


@dataclass(frozen=True)
class RunConfig:
    weights: object               # topology.WeightMatrix
    problem: object               # objectives.ProblemSpec
    schedules: object             # schedules.Schedules
    noise: tuple                  # one privacy.NoiseSchedule per learner
    projection: ProjectionSet
    stream: object
    horizon: int
    replicates: int = 1
    seed: int = 0
    checkpoints: tuple = None
    engine: str = None            # affine | replay | interp; default by loss
    noise_on: bool = True
    clip_gradients: bool = False
    record_dynamic: bool = False

    @property
    def m(self) -> int:
        return self.weights.m

    @property
    def dim(self) -> int:
        return self.projection.dim

    def resolved_engine(self) -> str:
        if self.engine:
            return self.engine
        return "affine" if isinstance(self.problem.loss, RidgeLoss) else "replay"

    def resolved_checkpoints(self):
        if self.checkpoints:
            cps = sorted({int(c) for c in self.checkpoints if 0 <= c <= self.horizon})
        else:
            cps = geometric_checkpoints(self.horizon)
        return cps

    def validate(self):
        """Collect configuration problems; empty list means runnable."""
        from . import topology

        problems = []
        report = topology.spectral_check_entries(self.weights.entries)
        if not report.ok:
            problems += [f"weights: {v}" for v in report.violations]
        if len(self.noise) != self.m:
            problems.append(
                f"noise schedule count {len(self.noise)} != m = {self.m}")
        if self.stream.dim != self.dim:
            problems.append(
                f"stream dim {self.stream.dim} != domain dim {self.dim}")
        if self.horizon < 1 or self.replicates < 1:
            problems.append("horizon and replicates must be >= 1")
        eng = self.resolved_engine()
        if eng == "affine" and not isinstance(self.problem.loss, RidgeLoss):
            problems.append("affine engine requires a ridge loss")
        if eng == "affine" and self.clip_gradients:
            problems.append("affine engine cannot clip per sample; use replay")
        return problems


def geometric_checkpoints(horizon, extra=()):
    """Powers of two plus endpoints (and any extras), capped at the horizon."""
    cps = {0, horizon}
    c = 1
    while c < horizon:
        cps.add(c)
        c *= 2
    cps.update(int(e) for e in extra if 0 <= e <= horizon)
    return sorted(cps)


@dataclass
class RunTrace:
    checkpoints: list
    tracking: list                # V_t per checkpoint
    regret: list                  # R_t per checkpoint
    eps: dict                     # learner -> eps partial sum per checkpoint
    seed: int
    config_digest: str
    dynamic_regret: float = None
    sq_dists: np.ndarray = None   # (replicates, ncp, m)
    gaps: np.ndarray = None

    def as_dict(self):
        return {
            "seed": self.seed,
            "config_digest": self.config_digest,
            "checkpoints": list(self.checkpoints),
            "tracking_error": list(self.tracking),
            "instantaneous_regret": list(self.regret),
            "eps_partial": {str(k): list(v) for k, v in self.eps.items()},
            "dynamic_regret": self.dynamic_regret,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def csv_rows(self):
        m = len(self.eps)
        header = ["t", "tracking_error", "instantaneous_regret"] + [
            f"eps_{i}" for i in range(m)]
        yield header
        for j, t in enumerate(self.checkpoints):
            row = [t, self.tracking[j], self.regret[j]]
            row += [self.eps[i][j] for i in range(m)]
            yield row


def config_digest(config: RunConfig) -> str:
    payload = {
        "W": np.asarray(config.weights.entries).round(15).tolist(),
        "schedules": (config.schedules.gamma0, config.schedules.u,
                      config.schedules.lambda0, config.schedules.v,
                      config.schedules.regime),
        "noise": [(ns.sigma, ns.varsigma) for ns in config.noise],
        "horizon": config.horizon,
        "replicates": config.replicates,
        "seed": config.seed,
        "engine": config.resolved_engine(),
        "noise_on": config.noise_on,
        "stream": repr(config.stream),
        "projection": repr(config.projection),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# noise and initialization helpers shared by both paths


def _initial_thetas(config, replicate):
    thetas = np.empty((config.m, config.dim))
    for i in range(config.m):
        gen = rngstream.stream(config.seed, replicate, i, rngstream.PURPOSE_INIT)
        thetas[i] = config.projection.sample_uniform(gen)
    return thetas


def _noise_block(config, replicate):
    """All broadcast-noise vectors for one replicate: shape (m, horizon+1, dim)."""
    m, n, T = config.m, config.dim, config.horizon
    if not config.noise_on:
        return np.zeros((m, T + 1, n))
    out = np.empty((m, T + 1, n))
    ts = np.arange(T + 1, dtype=float)
    # each round owns a whole number of Philox blocks so per-round
    # regeneration (privacy.message_noise) addresses the identical words
    words = rngstream.blocks_for(n) * rngstream.WORDS_PER_BLOCK
    for i in range(m):
        u = rngstream.uniform_block(config.seed, replicate, i,
                                    rngstream.PURPOSE_NOISE, 0, (T + 1) * words)
        nu = config.noise[i].nu_t(ts)[:, None]
        out[i] = rngstream.laplace_from_uniform(
            u.reshape(T + 1, words)[:, :n], nu)
    return out


# ---------------------------------------------------------------------------
# fast path: ridge + affine engine, vectorized across learners


def _run_replicate_ridge_fast(config: RunConfig, replicate, checkpoints):
    m, n, T = config.m, config.dim, config.horizon
    loss = config.problem.loss
    alpha = loss.alpha
    sched = config.schedules
    proj = config.projection
    W_off = config.weights.off_diagonal
    w_diag = config.weights.diagonal

    data = [config.stream.draw(config.seed, replicate, i, T + 1)
            for i in range(m)]
    X_all = np.stack([d[0] for d in data])          # (m, T+1, n)
    Y_all = np.stack([d[1] for d in data])          # (m, T+1)
    z_all = _noise_block(config, replicate)

    theta = proj.project_rows(_initial_thetas(config, replicate))
    M = theta + z_all[:, 0, :]

    A = np.zeros((m, n, n))
    b = np.zeros((m, n))
    diag_idx = np.arange(n)
    Sxx = np.zeros((n, n))
    Sxy = np.zeros(n)
    Syy = 0.0

    cp_set = set(checkpoints)
    sq = np.empty((len(checkpoints), m))
    gap = np.empty((len(checkpoints), m))
    cp_pos = {t: j for j, t in enumerate(checkpoints)}
    warm = None

    for t in range(T + 1):
        x = X_all[:, t, :]
        y = Y_all[:, t]
        A += 2.0 * np.einsum("mi,mj->mij", x, x)
        A[:, diag_idx, diag_idx] += 2.0 * alpha
        b -= 2.0 * x * y[:, None]
        Sxx += x.T @ x
        Sxy += x.T @ y
        Syy += float(y @ y)

        if t in cp_set:
            if not np.all(np.isfinite(theta)):
                bad = int(np.argmax(~np.isfinite(theta).all(axis=1)))
                raise SimulationError(
                    f"non-finite parameter at round {t}, learner {bad}")
            count = m * (t + 1)
            star = metrics.ridge_optimum(Sxx, Sxy, count, alpha, proj)
            warm = star
            j = cp_pos[t]
            diff = theta - star
            sq[j] = np.sum(diff * diff, axis=1)
            f_theta = (Syy - 2.0 * theta @ Sxy
                       + np.einsum("mi,ij,mj->m", theta, Sxx, theta)) / count \
                + alpha * np.sum(theta * theta, axis=1)
            f_star = (Syy - 2.0 * star @ Sxy + star @ Sxx @ star) / count \
                + alpha * star @ star
            gap[j] = f_theta - f_star
        if t == T:
            break

        d = (np.einsum("mij,mj->mi", A, theta) + b) / (t + 1)
        gamma_t = sched.gamma(t)
        lambda_t = sched.lam(t)
        mix = W_off @ M + w_diag[:, None] * theta
        theta = proj.project_rows(theta + gamma_t * mix - lambda_t * d)
        M = theta + z_all[:, t + 1, :]

    return sq, gap


# ---------------------------------------------------------------------------
# reference path: per-learner state machines, any loss/engine


def _build_learners(config, replicate):
    proj = config.projection
    eng = config.resolved_engine()
    clip = config.problem.l1_clip if config.clip_gradients else None
    learners = []
    for i in range(config.m):
        theta0 = proj.project(_initial_thetas(config, replicate)[i])
        mem = make_engine(eng, config.problem.loss, config.dim, clip=clip)
        learners.append(LearnerState(id=i, theta=theta0, memory=mem,
                                     projection=proj, clip=None))
    return learners


def _run_replicate_generic(config: RunConfig, replicate, checkpoints,
                           message_tap=None):
    m, n, T = config.m, config.dim, config.horizon
    loss = config.problem.loss
    sched = config.schedules
    proj = config.projection
    W = config.weights.entries
    is_ridge = isinstance(loss, RidgeLoss)

    data = [config.stream.draw(config.seed, replicate, i, T + 1)
            for i in range(m)]
    z_all = _noise_block(config, replicate)
    learners = _build_learners(config, replicate)
    theta = np.stack([st.theta for st in learners])
    M = theta + z_all[:, 0, :]

    if is_ridge:
        Sxx = np.zeros((n, n))
        Sxy = np.zeros(n)
        Syy = 0.0
    warm = None

    cp_set = set(checkpoints)
    cp_pos = {t: j for j, t in enumerate(checkpoints)}
    sq = np.empty((len(checkpoints), m))
    gap = np.empty((len(checkpoints), m))
    dyn_own = [] if config.record_dynamic else None
    dyn_star = [] if config.record_dynamic else None

    neighbor_rows = []
    for i in range(m):
        row = [(j, W[i, j]) for j in range(m) if j != i and W[i, j] != 0.0]
        neighbor_rows.append(row)

    for t in range(T + 1):
        xs = [data[i][0][t] for i in range(m)]
        ys = [data[i][1][t] for i in range(m)]
        if is_ridge:
            Xt = np.stack(xs)
            yt = np.asarray(ys)
            Sxx += Xt.T @ Xt
            Sxy += Xt.T @ yt
            Syy += float(yt @ yt)

        record_cp = t in cp_set
        if record_cp or config.record_dynamic:
            theta_now = np.stack([st.theta for st in learners])
            if not np.all(np.isfinite(theta_now)):
                bad = int(np.argmax(~np.isfinite(theta_now).all(axis=1)))
                raise SimulationError(
                    f"non-finite parameter at round {t}, learner {bad}")
            count = m * (t + 1)
            if is_ridge:
                star = metrics.ridge_optimum(Sxx, Sxy, count, loss.alpha, proj)
            else:
                Xc = np.concatenate([data[i][0][:t + 1] for i in range(m)])
                Yc = np.concatenate([data[i][1][:t + 1] for i in range(m)])
                star = metrics.logistic_optimum(loss, Xc, Yc, proj, theta0=warm)
            warm = star
        if record_cp:
            j = cp_pos[t]
            diff = theta_now - star
            sq[j] = np.sum(diff * diff, axis=1)
            gap[j] = [_objective(loss, data, t, m, th, Sxx if is_ridge else None,
                                 Sxy if is_ridge else None,
                                 Syy if is_ridge else None)
                      for th in theta_now]
            gap[j] -= _objective(loss, data, t, m, star,
                                 Sxx if is_ridge else None,
                                 Sxy if is_ridge else None,
                                 Syy if is_ridge else None)
        if config.record_dynamic:
            dyn_own.append([loss.loss(learners[i].theta, xs[i], ys[i])
                            for i in range(m)])
            dyn_star.append([loss.loss(star, xs[i], ys[i]) for i in range(m)])
        if t == T:
            break

        gamma_t = sched.gamma(t)
        lambda_t = sched.lam(t)
        if message_tap is not None:
            message_tap(t, M.copy())
        for i, st in enumerate(learners):
            msgs = [(w, M[j]) for j, w in neighbor_rows[i]]
            local_update(st, xs[i], ys[i], msgs, gamma_t, lambda_t)
        theta = np.stack([st.theta for st in learners])
        M = theta + z_all[:, t + 1, :]

    dyn = None
    if config.record_dynamic:
        dyn = metrics.dynamic_regret(np.asarray(dyn_own), np.asarray(dyn_star))
    return sq, gap, dyn


def _objective(loss, data, t, m, theta, Sxx, Sxy, Syy):
    if Sxx is not None:
        count = m * (t + 1)
        return float((Syy - 2.0 * theta @ Sxy + theta @ Sxx @ theta) / count
                     + loss.alpha * theta @ theta)
    Xc = np.concatenate([data[i][0][:t + 1] for i in range(m)])
    Yc = np.concatenate([data[i][1][:t + 1] for i in range(m)])
    return float(loss.loss_batch(theta, Xc, Yc).mean())


# ---------------------------------------------------------------------------
# top-level driver


def run(config: RunConfig) -> RunTrace:
    problems = config.validate()
    if problems:
        raise SimulationError("invalid configuration: " + "; ".join(problems))
    checkpoints = config.resolved_checkpoints()
    eng = config.resolved_engine()
    fast = eng == "affine" and isinstance(config.problem.loss, RidgeLoss) \
        and not config.record_dynamic

    all_sq = np.empty((config.replicates, len(checkpoints), config.m))
    all_gap = np.empty_like(all_sq)
    dyn_total = 0.0 if config.record_dynamic else None
    for rep in range(config.replicates):
        if fast:
            sq, gap = _run_replicate_ridge_fast(config, rep, checkpoints)
            dyn = None
        else:
            sq, gap, dyn = _run_replicate_generic(config, rep, checkpoints)
        all_sq[rep] = sq
        all_gap[rep] = gap
        if dyn is not None:
            dyn_total += dyn

    tracking = [metrics.tracking_error(all_sq[:, j, :])
                for j in range(len(checkpoints))]
    regret = [metrics.instantaneous_regret(all_gap[:, j, :])
              for j in range(len(checkpoints))]

    eps = {}
    for i in range(config.m):
        curve, _ = privacy.budget_curve(
            config.problem, config.schedules, config.noise[i],
            config.weights.wbar if config.m > 1 else 1.0,
            config.dim, checkpoints)
        eps[i] = [curve[t] for t in checkpoints]

    dyn_mean = dyn_total / config.replicates if dyn_total is not None else None
    return RunTrace(checkpoints=checkpoints, tracking=tracking, regret=regret,
                    eps=eps, seed=config.seed, config_digest=config_digest(config),
                    dynamic_regret=dyn_mean, sq_dists=all_sq, gaps=all_gap)


# ---------------------------------------------------------------------------
# coupled adjacent-dataset replay for the sensitivity harness


def coupled_pair_trace(config: RunConfig, learner_id: int, k: int,
                       alt_x, alt_y, replicate: int = 0):
    """1-norm divergence of one learner's trajectory under a one-entry change.

    The perturbed trajectory sees identical received messages and identical
    own-noise, so the divergence is exactly the sensitivity coupling: zero
    until round k, then driven only by the differing sample.
    """
    T = config.horizon
    if not 0 <= k <= T:
        raise ValueError(f"differing index {k} outside [0, {T}]")
    taps = {}

    def tap(t, M):
        taps[t] = M

    checkpoints = [T]
    _run_replicate_generic(config, replicate, checkpoints, message_tap=tap)

    # replay learner_id alone with the perturbed dataset
    X, Y = config.stream.draw(config.seed, replicate, learner_id, T + 1)
    Xp = X.copy()
    Yp = Y.copy()
    alt_x = np.asarray(alt_x, dtype=float)
    if alt_x.shape != (config.dim,):
        raise ValueError("perturbed sample has wrong dimension")
    Xp[k] = alt_x
    Yp[k] = alt_y

    clip = config.problem.l1_clip if config.clip_gradients else None
    eng = config.resolved_engine()
    proj = config.projection
    W = config.weights.entries
    row = [(j, W[learner_id, j]) for j in range(config.m)
           if j != learner_id and W[learner_id, j] != 0.0]

    def trajectory(Xd, Yd):
        theta0 = proj.project(_initial_thetas(config, replicate)[learner_id])
        mem = make_engine(eng, config.problem.loss, config.dim, clip=clip)
        st = LearnerState(id=learner_id, theta=theta0, memory=mem,
                          projection=proj, clip=None)
        out = [st.theta.copy()]
        sched = config.schedules
        for t in range(T):
            msgs = [(w, taps[t][j]) for j, w in row]
            local_update(st, Xd[t], Yd[t], msgs, sched.gamma(t), sched.lam(t))
            out.append(st.theta.copy())
        return np.asarray(out)

    base = trajectory(X, Y)
    pert = trajectory(Xp, Yp)
    return np.abs(base - pert).sum(axis=1)
