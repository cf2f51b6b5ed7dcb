import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sweptsdf import DomainError, Motion, Pose2, Shape, ShapeValidationError, l_shape, pose_at, shape_sdf
from sweptsdf import shape_sdf_gradient
from sweptsdf.traj import Boundary, minco_construct

from conftest import point_in_polygon, polygon_boundary_distance

coord = st.floats(-4, 4, allow_nan=False)
SHAPES = {
    "disk": Shape.disk(1.0, (0.2, -0.1)),
    "box": Shape.box((0.5, 0.3), (0.1, 0.0)),
    "convex": Shape.convex_polygon([[0, 0], [1.5, 0], [1.2, 1], [0.2, 1.3]]),
    "l": l_shape(2.0, 1.0, centered=False),
    "union": Shape.union([Shape.disk(0.5), Shape.box((1.0, 0.2), (1.0, 0.0))]),
}


def test_disk_values():
    d = Shape.disk(1.0)
    assert shape_sdf(d, [2.0, 0.0]) == pytest.approx(1.0, abs=1e-12)
    assert shape_sdf(d, [0.0, 0.0]) == pytest.approx(-1.0, abs=1e-12)
    np.testing.assert_allclose(shape_sdf_gradient(d, [2.0, 0.0]), [1.0, 0.0], atol=1e-12)


def test_box_values():
    b = Shape.box((0.5, 0.5))
    assert shape_sdf(b, [1.0, 0.0]) == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(shape_sdf_gradient(b, [1.0, 0.0]), [1.0, 0.0], atol=1e-12)
    assert shape_sdf(b, [1.0, 1.0]) == pytest.approx(math.sqrt(0.5), abs=1e-12)
    assert shape_sdf(b, [0.0, 0.1]) == pytest.approx(-0.4, abs=1e-12)


def test_l_reentrant_corner():
    L = l_shape(2.0, 1.0, centered=False)
    assert shape_sdf(L, [1.5, 1.5]) == pytest.approx(0.5, abs=1e-12)
    verts = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], float)
    assert polygon_boundary_distance([1.5, 1.5], verts) == pytest.approx(0.5, abs=1e-3)


def test_batch_matches_scalar(rng):
    pts = rng.uniform(-3, 3, (50, 2))
    for s in SHAPES.values():
        np.testing.assert_allclose(shape_sdf(s, pts), [shape_sdf(s, p) for p in pts], atol=1e-14)


@pytest.mark.parametrize("name", sorted(SHAPES))
def test_lipschitz(name, rng):
    s = SHAPES[name]
    a = rng.uniform(-4, 4, (10000, 2))
    b = a + rng.normal(scale=0.5, size=a.shape)
    lhs = np.abs(shape_sdf(s, a) - shape_sdf(s, b))
    assert np.all(lhs <= np.linalg.norm(a - b, axis=1) + 1e-9)


@pytest.mark.parametrize("name", sorted(SHAPES))
def test_bounding_radius_sound(name, rng):
    s = SHAPES[name]
    ang = rng.uniform(0, 2 * np.pi, 5000)
    r = s.bounding_radius * (1 + 1e-6) + rng.exponential(0.5, 5000)
    pts = np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
    d = shape_sdf(s, pts)
    assert np.all(d > 0)
    assert np.all(d >= np.linalg.norm(pts, axis=1) - s.bounding_radius - 1e-12)


@given(coord, coord)
def test_polygon_sign_and_distance(x, y):
    """Sign from an independent crossing test, magnitude from a sampled boundary."""
    verts = np.array([[0, 0], [3, 0], [3, 2], [2, 0.8], [1, 2.2], [0, 1.5]])
    s = Shape.polygon(verts)
    d = shape_sdf(s, [x, y])
    ref = polygon_boundary_distance([x, y], verts)
    if ref > 3.0 / 2000:  # off the boundary by more than the sampling gap
        assert (d < 0) == point_in_polygon((x, y), verts)
    assert abs(abs(d) - ref) <= 3.0 / 2000 + 1e-9


@given(coord, coord)
def test_gradient_matches_fd(x, y):
    s = SHAPES["l"]
    p = np.array([x, y])
    h = 1e-5
    fd = np.array([(shape_sdf(s, p + e) - shape_sdf(s, p - e)) / (2 * h) for e in np.eye(2) * h])
    g = shape_sdf_gradient(s, p)
    assert np.linalg.norm(g) == pytest.approx(1.0, abs=1e-9) or np.linalg.norm(g) <= 1.0
    if abs(np.linalg.norm(fd) - 1.0) < 1e-6:  # smooth point
        np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-4)


def test_cw_polygon_is_reversed():
    cw = [[0, 0], [0, 1], [1, 1], [1, 0]]
    assert shape_sdf(Shape.polygon(cw), [0.5, 0.5]) == pytest.approx(-0.5)


@pytest.mark.parametrize("verts", [[[0, 0], [1, 0]], [[0, 0], [1, 1], [1, 0], [0, 1]], [[0, 0], [1, 0], [2, 0]]])
def test_degenerate_polygons_rejected(verts):
    with pytest.raises(ShapeValidationError):
        Shape.polygon(verts)


def test_nonconvex_rejected_as_convex():
    with pytest.raises(ShapeValidationError):
        Shape.convex_polygon([[0, 0], [2, 0], [1, 0.5], [2, 2], [0, 2]])


def test_bad_primitives_rejected():
    with pytest.raises(ShapeValidationError):
        Shape.disk(0.0)
    with pytest.raises(ShapeValidationError):
        Shape.box((1.0, -1.0))
    with pytest.raises(ShapeValidationError):
        Shape.union([])


def test_time_varying_disk():
    s = Shape.time_varying_disk(0.5, 1.5)
    assert s.time_varying
    assert shape_sdf(s, [2.0, 0.0], 0.0) == pytest.approx(1.5)
    assert shape_sdf(s, [2.0, 0.0], 1.0) == pytest.approx(0.5)
    ts = np.linspace(0, 1, 1001)
    vals = np.array([shape_sdf(s, [2.0, 0.0], t) for t in ts])
    assert np.max(np.abs(np.diff(vals))) <= 1.0 / 1000 + 1e-12
    assert s.bounding_radius == pytest.approx(1.5)


@pytest.mark.parametrize("name", sorted(SHAPES))
def test_shape_json_round_trip(name):
    s = SHAPES[name]
    s2 = Shape.from_dict(s.to_dict())
    pts = np.random.default_rng(0).uniform(-3, 3, (100, 2))
    np.testing.assert_array_equal(shape_sdf(s, pts), shape_sdf(s2, pts))


@given(coord, coord, st.floats(-10, 10), coord, coord)
def test_pose_round_trip(tx, ty, yaw, px, py):
    pose = Pose2((tx, ty), yaw)
    p = np.array([px, py])
    np.testing.assert_allclose(pose.world_to_body(pose.body_to_world(p)), p, atol=1e-12)


def test_motion_poses():
    m = Motion.constant((1.0, 2.0, 0.3), 0.0, 2.0)
    assert pose_at(m, 1.3).translation == pytest.approx((1.0, 2.0))
    lin = Motion.linear((0, 0, 0), (4, 0, 0))
    assert pose_at(lin, 0.5).translation == pytest.approx((2.0, 0.0))
    with pytest.raises(DomainError):
        pose_at(lin, 1.5)
    assert pose_at(lin, 1.5, clamp=True).translation == pytest.approx((4.0, 0.0))


def test_inverse_transform_round_trip(rng):
    m = Motion.linear((0, 0, 0), (4, 1, 2.0))
    for t in rng.uniform(0, 1, 20):
        w = rng.uniform(-5, 5, 2)
        b = m.inverse_transform(t, w)
        np.testing.assert_allclose(pose_at(m, t).body_to_world(b), w, atol=1e-12)
        pose = pose_at(m, t)
        c, s = math.cos(pose.yaw), math.sin(pose.yaw)
        np.testing.assert_allclose(b, np.array([[c, s], [-s, c]]) @ (w - pose.translation), atol=1e-12)


def test_trajectory_motion_junction_continuity():
    """Both one-sided limits at each junction agree."""
    q = np.array([[1.0, 0.5, 0.3], [2.0, -0.5, 0.8]])
    traj = minco_construct(Boundary.rest([0, 0, 0], [3, 0, 1.0]), q, [0.7, 1.1, 0.9])
    m = Motion.from_trajectory(traj)
    for i in range(traj.segments - 1):
        T = traj.durations[i]
        left = traj.coeffs[i].T @ (T ** np.arange(6))
        right = traj.coeffs[i + 1][0]
        np.testing.assert_allclose(left, right, atol=1e-9)
        np.testing.assert_allclose(m.poses([m.breaks[i + 1]])[0], right, atol=1e-9)
