"""Projection sets, the single-round update, and broadcasts."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from ldonline.learner import (LearnerState, ProjectionSet, local_update,
                              make_broadcast, project)
from ldonline.memory import make_engine
from ldonline.objectives import RidgeLoss
from ldonline.privacy import NoiseSchedule
from ldonline import rngstream

finite = st.floats(-50.0, 50.0, allow_nan=False)


def _ball(n, radius=1.0):
    return ProjectionSet(kind="ball", center=np.zeros(n), radius=radius)


def _box(n, half=1.0):
    return ProjectionSet(kind="box", lo=-half * np.ones(n), hi=half * np.ones(n))


@settings(max_examples=1000, deadline=None)
@given(v=hnp.arrays(np.float64, (3,), elements=finite),
       radius=st.floats(0.1, 5.0), kind=st.sampled_from(["ball", "box"]),
       seed=st.integers(0, 2**32 - 1))
def test_projection_idempotent_and_optimal(v, radius, kind, seed):
    """Projection is idempotent, feasible, and no random feasible point is closer."""
    ps = _ball(3, radius) if kind == "ball" else _box(3, radius)
    p = ps.project(v)
    assert ps.contains(p)
    np.testing.assert_allclose(ps.project(p), p, rtol=0, atol=1e-12)
    if ps.contains(v):
        np.testing.assert_array_equal(p, v)
    # random-search oracle: no sampled feasible point beats the projection
    rng = np.random.default_rng(seed)
    best = np.linalg.norm(v - p)
    for _ in range(30):
        q = ps.sample_uniform(rng)
        assert np.linalg.norm(v - q) >= best - 1e-9


@settings(max_examples=1000, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(["ball", "box"]))
def test_sample_uniform_stays_inside(seed, kind):
    ps = _ball(4, 2.0) if kind == "ball" else _box(4, 2.0)
    rng = np.random.default_rng(seed)
    assert ps.contains(ps.sample_uniform(rng))


def test_projection_rows_matches_single():
    rng = np.random.default_rng(0)
    V = rng.normal(size=(50, 3)) * 4
    for ps in (_ball(3, 1.3), _box(3, 0.7)):
        R = ps.project_rows(V)
        for row, ref in zip(R, V):
            np.testing.assert_allclose(row, ps.project(ref), rtol=0, atol=1e-12)


def test_projection_geometry():
    ps = _ball(2, 1.0)
    np.testing.assert_allclose(ps.project(np.array([3.0, 4.0])),
                               np.array([0.6, 0.8]), rtol=1e-12)
    assert ps.diameter == 2.0
    box = _box(2, 1.0)
    np.testing.assert_array_equal(box.project(np.array([2.0, -0.5])),
                                  np.array([1.0, -0.5]))
    assert box.diameter == pytest.approx(2.0 * np.sqrt(2.0))


def test_projection_set_validation():
    with pytest.raises(ValueError):
        ProjectionSet(kind="ball", center=np.zeros(2), radius=0.0)
    with pytest.raises(ValueError):
        ProjectionSet(kind="box", lo=np.array([0.0]), hi=np.array([0.0]))
    with pytest.raises(ValueError):
        ProjectionSet(kind="simplex")
    assert project(_ball(1), np.array([5.0]))[0] == pytest.approx(1.0)


def _state(theta, ps, loss=None, clip=None):
    loss = loss or RidgeLoss(0.3)
    return LearnerState(id=0, theta=theta, memory=make_engine("replay", loss, len(theta), clip=clip),
                        projection=ps, clip=None)


def test_local_update_algebra():
    """One round reproduces the hand-computed affine combination."""
    ps = _box(2, 10.0)
    loss = RidgeLoss(0.3)
    theta = np.array([0.5, -0.5])
    st_ = _state(theta.copy(), ps, loss)
    x, y = np.array([1.0, 2.0]), 0.7
    msgs = [(0.25, np.array([1.0, 1.0])), (0.15, np.array([-2.0, 0.0]))]
    local_update(st_, x, y, msgs, gamma_t=0.2, lambda_t=0.1)
    d = loss.grad(theta, x, y)
    mix = 0.25 * (msgs[0][1] - theta) + 0.15 * (msgs[1][1] - theta)
    expected = theta + 0.2 * mix - 0.1 * d
    np.testing.assert_allclose(st_.theta, expected, rtol=1e-12)
    assert st_.round == 1


def test_local_update_projects_back():
    ps = _ball(2, 0.5)
    st_ = _state(np.array([0.4, 0.0]), ps)
    local_update(st_, np.array([5.0, 5.0]), -30.0, [], 0.1, 1.0)
    assert ps.contains(st_.theta, tol=1e-12)
    assert np.linalg.norm(st_.theta) == pytest.approx(0.5)


def test_local_update_rejects_nonpositive_weight():
    st_ = _state(np.zeros(2), _box(2))
    with pytest.raises(ValueError):
        local_update(st_, np.ones(2), 1.0, [(-0.1, np.zeros(2))], 0.1, 0.1)


def test_consensus_contraction_two_learners():
    """Noise-free pair with no gradient step contracts by (1 - 2 gamma w)."""
    ps = _box(1, 100.0)
    loss = RidgeLoss(0.0)
    a = _state(np.array([1.0]), ps, loss)
    b = _state(np.array([-1.0]), ps, loss)
    w, gamma = 0.4, 0.3
    # zero gradients: feed samples with x = 0, y = 0
    x, y = np.array([0.0]), 0.0
    gap = 2.0
    for _ in range(5):
        ma, mb = a.theta.copy(), b.theta.copy()
        local_update(a, x, y, [(w, mb)], gamma, 0.5)
        local_update(b, x, y, [(w, ma)], gamma, 0.5)
        new_gap = abs(a.theta[0] - b.theta[0])
        assert new_gap == pytest.approx((1 - 2 * gamma * w) * gap, rel=1e-12)
        gap = new_gap


def test_initial_state_must_be_feasible():
    with pytest.raises(ValueError):
        _state(np.array([2.0, 2.0]), _ball(2, 1.0))


def test_make_broadcast_adds_schedule_noise():
    ps = _box(2, 5.0)
    st_ = _state(np.array([0.3, -0.2]), ps)
    ns = NoiseSchedule(sigma=1.0, varsigma=0.1)
    rng = rngstream.stream(0, 0, 0, rngstream.PURPOSE_NOISE)
    msg = make_broadcast(st_, ns, rng)
    assert not np.array_equal(msg, st_.theta)
    clean = make_broadcast(st_, ns, rng, noise_on=False)
    np.testing.assert_array_equal(clean, st_.theta)
    clean[0] = 99.0   # returned copy must not alias state
    assert st_.theta[0] == pytest.approx(0.3)
