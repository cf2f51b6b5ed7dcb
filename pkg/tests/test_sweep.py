import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sweptsdf import DomainError, Motion, Shape, SweepProblem, body_speed_bound, l_shape, metric_g, metric_g_batch
from sweptsdf import rot, shape_sdf, shape_sdf_gradient
from sweptsdf.traj import Boundary, minco_construct

from oracles import body_distance, central_fd, dense_g, differentiable_point


def capsule_problem():
    return SweepProblem(Shape.disk(1.0), Motion.linear((0, 0, 0), (4, 0, 0)))


def rotating_l_problem():
    return SweepProblem(l_shape(2.0, 1.0), Motion.linear((0, 0, 0), (4, 0, math.pi / 2)))


def curved_problem():
    q = np.array([[1.0, 1.0, 0.8], [2.5, -0.5, 2.0]])
    traj = minco_construct(Boundary.rest([0, 0, 0], [4, 0, 3.0]), q, [1.0, 1.2, 0.8])
    return SweepProblem(l_shape(1.0, 0.4), Motion.from_trajectory(traj))


PROBLEMS = {"capsule": capsule_problem, "rotating_l": rotating_l_problem, "curved": curved_problem}


def test_static_disk():
    pr = SweepProblem(Shape.disk(1.0), Motion.constant((0, 0, 0)))
    r = metric_g(pr, [3.0, 0.0])
    assert r.g_value == pytest.approx(2.0, abs=1e-12)
    assert pr.motion.t_start <= r.t_star <= pr.motion.t_end


def test_capsule_examples():
    pr = capsule_problem()
    r = metric_g(pr, [2.0, 3.0])
    assert r.g_value == pytest.approx(2.0, abs=1e-9)
    assert r.t_star == pytest.approx(0.5, abs=1e-6)
    r = metric_g(pr, [2.0, 0.0])
    assert r.g_value == pytest.approx(-1.0, abs=1e-9)
    assert r.t_star == pytest.approx(0.5, abs=1e-6)


def test_rotating_l_matches_dense_sampling(rng):
    pr = rotating_l_problem()
    pts = rng.uniform([-2.5, -3.5], [5.5, 4.5], (100, 2))
    rows = metric_g_batch(pr, pts)
    for p, row in zip(pts, rows):
        ref, _ = dense_g(pr, p, 1e-4)
        assert row[0] <= ref + 1e-12
        assert row[0] == pytest.approx(ref, abs=1e-3)


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_result_invariants(name, rng):
    pr = PROBLEMS[name]()
    for p in rng.uniform(-2, 5, (40, 2)):
        r = metric_g(pr, p)
        assert shape_sdf(pr.shape, r.local_point) == pytest.approx(r.g_value, abs=1e-9)
        yaw = pr.motion.pose_at(r.t_star).yaw
        np.testing.assert_allclose(r.gradient_wrt_p, rot(yaw) @ shape_sdf_gradient(pr.shape, r.local_point),
                                   atol=1e-12)
        np.testing.assert_allclose(pr.motion.inverse_transform(r.t_star, p), r.local_point, atol=1e-9)


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_pruning_is_sound(name, rng):
    pr = PROBLEMS[name]()
    pts = rng.uniform(-3, 6, (200, 2))
    a = metric_g_batch(pr, pts, prune=True)[:, 0]
    b = metric_g_batch(pr, pts, prune=False)[:, 0]
    np.testing.assert_allclose(a, b, atol=1e-9)


@given(st.floats(-3, 7), st.floats(-4, 4))
def test_g_is_global_min_over_samples(x, y):
    pr = curved_problem()
    ts = np.linspace(pr.motion.t_start, pr.motion.t_end, 2001)
    g = metric_g(pr, [x, y]).g_value
    assert g <= body_distance(pr, [x, y], ts).min() + 1e-9


def test_envelope_gradient_matches_fd(rng):
    pr = rotating_l_problem()
    checked = 0
    while checked < 30:
        p = rng.uniform([-2.5, -3.5], [5.5, 4.5])
        if not differentiable_point(pr, p, metric_g):
            continue
        fd = central_fd(lambda q: metric_g(pr, q).g_value, p, 1e-5)
        g = metric_g(pr, p).gradient_wrt_p
        assert np.linalg.norm(g - fd) <= 1e-3 * max(np.linalg.norm(fd), 1e-12)
        checked += 1


def test_speed_bound_examples(rng):
    assert body_speed_bound(SweepProblem(Shape.disk(1.0), Motion.constant((1, 2, 3)))) == 0.0
    pr = SweepProblem(Shape.disk(1.0), Motion.linear((0, 0, 0), (3, 4, 0)))
    assert body_speed_bound(pr) == pytest.approx(5.0, rel=1e-9)


@pytest.mark.parametrize("name", ["rotating_l", "curved"])
def test_speed_bound_certified(name, rng):
    pr = PROBLEMS[name]()
    m = pr.motion
    for p in rng.uniform(-2, 5, (10, 2)):
        L = body_speed_bound(pr, p)
        t1 = rng.uniform(m.t_start, m.t_end, 10000)
        t2 = np.clip(t1 + rng.normal(scale=0.05, size=t1.size), m.t_start, m.t_end)
        lhs = np.abs(body_distance(pr, p, t1) - body_distance(pr, p, t2))
        assert np.all(lhs <= L * np.abs(t1 - t2) + 1e-12)


def test_time_varying_disk_metric():
    pr = SweepProblem(Shape.time_varying_disk(0.5, 1.5), Motion.constant((0, 0, 0)))
    r = metric_g(pr, [3.0, 0.0])
    assert r.g_value == pytest.approx(1.5, abs=1e-9)
    assert r.t_star == pytest.approx(1.0, abs=1e-6)


def test_invalid_inputs():
    pr = capsule_problem()
    with pytest.raises(ValueError):
        metric_g(pr, [np.nan, 0.0])
    with pytest.raises(ValueError):
        SweepProblem(Shape.disk(1.0), Motion.linear((0, 0, 0), (1, 0, 0)), time_resolution=0.0)
    with pytest.raises(ValueError):
        Motion(np.zeros((1, 2, 3)), np.array([1.0, 0.5]))
    with pytest.raises(DomainError):
        Motion.linear((0, 0, 0), (1, 0, 0), 1.0, 1.0)
