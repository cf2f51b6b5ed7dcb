import math

import numpy as np
import pytest

from sweptsdf import (GsipConfig, InvalidGoalError, InvalidStartError, Motion, NoPathError, Shape, SweepProblem,
                      l_shape, metric_g_batch, rot, shape_sdf, smoothed_l1, svsdf_query)
from sweptsdf.cases import planner_robot, rotating_l_case
from sweptsdf.optimizer import lbfgs_minimize
from sweptsdf.planner import (ChannelMaps, PlannerConfig, Scene, astar_search, backend_optimize, build_masks,
                              cca_verify, collide, midend_fit, plan, random_scene, report_json)
from sweptsdf.planner.backend import BackendObjective, ObstacleTerm, obstacle_values, sweep_problem
from sweptsdf.planner.costs import yaw_residual
from sweptsdf.planner.midend import initial_fit, max_position_residual
from sweptsdf.planner.scene import MapSpec
from sweptsdf.planner.verify import dense_clearance
from sweptsdf.traj import Boundary, WaypointParams, minco_construct

from oracles import central_fd

CFG = PlannerConfig()


def footprint_cells(shape, cell, ix, iy, yaw):
    """Cells whose centre is inside the shape placed at cell (ix, iy)'s centre,
    by direct enumeration around it."""
    r = int(math.ceil(shape.bounding_radius / cell)) + 2
    out = set()
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            local = rot(yaw).T @ np.array([dx * cell, dy * cell])
            if shape_sdf(shape, local) <= 0:
                out.add((ix + dx, iy + dy))
    return out


def direct_collide(shape, scene, ix, iy, yaw):
    for x, y in footprint_cells(shape, scene.cell_size, ix, iy, yaw):
        if not scene.in_bounds(x, y) or scene.occupancy[y, x]:
            return True
    return False


# ---------------------------------------------------------------------------
# footprint masks and collision
# ---------------------------------------------------------------------------


def test_masks_agree_with_sdf():
    shape = planner_robot()
    m = build_masks(shape, 0.1, 36)
    for k in range(0, 36, 5):
        yaw = m.yaw_values[k]
        got = {(int(dx), int(dy)) for dx, dy in m.offsets(k)}
        assert got == footprint_cells(shape, 0.1, 0, 0, yaw)


def test_collide_examples():
    shape = Shape.box((0.25, 0.15))
    m = build_masks(shape, 0.1, 36)
    empty = Scene(np.zeros((20, 20), bool))
    assert not collide(m, empty, 10, 10, 0)
    occ = np.zeros((20, 20), bool)
    occ[10, 12] = True
    one = Scene(occ)
    assert collide(m, one, 10, 10, 0)
    assert not collide(m, one, 10, 10, 9)  # turned a quarter turn the footprint misses it
    # footprint hanging over the map edge
    assert collide(m, empty, 1, 10, 0)
    assert direct_collide(shape, empty, 1, 10, 0)


def test_collide_matches_enumeration_and_channel_maps(rng):
    shape = planner_robot()
    scene = random_scene(3, MapSpec(size=6.0))
    m = build_masks(shape, scene.cell_size, 36)
    maps = ChannelMaps(m, scene.occupancy)
    for _ in range(150):
        ix, iy = (int(v) for v in rng.integers(-3, 63, 2))
        k = int(rng.integers(36))
        c = collide(m, scene, ix, iy, k)
        assert c == maps.collide(ix, iy, k)
        if scene.in_bounds(ix, iy):
            assert c == direct_collide(shape, scene, ix, iy, m.yaw_values[k])


# ---------------------------------------------------------------------------
# A*
# ---------------------------------------------------------------------------


def test_astar_straight_on_empty_map():
    scene = Scene(np.zeros((20, 20), bool), (0, 0), 1.0, (1.5, 1.5, 0.0), (18.5, 1.5, 0.0))
    m = build_masks(Shape.disk(0.5), 1.0, 36)
    res = astar_search(scene, m)
    cells = res.cells
    assert cells[0][:2] == (1, 1) and cells[-1][:2] == (18, 1)
    assert all(c[1] == 1 for c in cells)
    assert [c[0] for c in cells] == list(range(1, 19))
    assert all(c[2] == 0 for c in cells)


def slot_scene():
    """Wall three cells thick across the map with a one-cell slot; cell size 1."""
    occ = np.zeros((21, 21), bool)
    occ[9:12, :] = True
    occ[9:12, 10] = False
    return Scene(occ, (0, 0), 1.0, (10.5, 4.5, 0.0), (10.5, 16.5, 0.0))


def test_astar_slot_needs_quarter_turn():
    scene = slot_scene()
    bar = Shape.box((1.5, 0.5))  # 3 cells long along body x, 1 cell wide
    m = build_masks(bar, 1.0, 36)
    assert collide(m, scene, 10, 10, 0)
    passable = [k for k in range(36) if not collide(m, scene, 10, 10, k)]
    assert 9 in passable and 27 in passable
    # unlimited yaw scan: the footprint only turns when the slot forces it
    res = astar_search(scene, m, max_yaw_step=18)
    crossing = [c for c in res.cells if 9 <= c[1] <= 11]
    assert crossing
    for ix, iy, k in crossing:
        assert k in passable
        assert not direct_collide(bar, scene, ix, iy, m.yaw_values[k])
        dev = abs((m.yaw_values[k] - math.pi / 2 + math.pi / 2) % math.pi - math.pi / 2)
        assert dev <= math.radians(20) + 1e-12
    with pytest.raises(NoPathError):
        astar_search(scene, m, max_yaw_step=3)


def test_astar_errors():
    m = build_masks(Shape.disk(0.5), 1.0, 36)
    occ = np.zeros((20, 20), bool)
    occ[5:12, 5] = occ[5:12, 11] = occ[5, 5:12] = occ[11, 5:12] = True
    with pytest.raises(NoPathError):
        astar_search(Scene(occ, (0, 0), 1.0, (8.5, 8.5, 0), (15.5, 15.5, 0)), m)
    with pytest.raises(InvalidStartError):
        astar_search(Scene(occ, (0, 0), 1.0, (5.5, 8.5, 0), (15.5, 15.5, 0)), m)
    with pytest.raises(InvalidGoalError):
        astar_search(Scene(occ, (0, 0), 1.0, (15.5, 15.5, 0), (11.5, 8.5, 0)), m)
    with pytest.raises(InvalidStartError):
        astar_search(Scene(occ, (0, 0), 1.0, (-3.0, 8.5, 0), (15.5, 15.5, 0)), m)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_astar_nodes_are_collision_free(seed):
    scene = random_scene(seed)
    shape = planner_robot()
    m = build_masks(shape, scene.cell_size, 36)
    res = astar_search(scene, m)
    for ix, iy, k in res.cells:
        assert not collide(m, scene, ix, iy, k)
    steps = np.abs(np.diff(np.array([c[:2] for c in res.cells]), axis=0))
    assert np.all(steps.max(axis=1) == 1)


# ---------------------------------------------------------------------------
# mid-end
# ---------------------------------------------------------------------------


def test_yaw_residual_unit():
    d = math.pi / 2
    direct = float(np.sum((rot(0.0).T @ rot(d) - np.eye(2)) ** 2))
    assert direct == pytest.approx(4.0, abs=1e-12)
    assert yaw_residual(d)[0] == pytest.approx(4.0, abs=1e-12)
    assert smoothed_l1(yaw_residual(d)[0], CFG.mu)[0] == pytest.approx(4.0 - CFG.mu / 2, abs=1e-12)
    for a in np.linspace(-3, 3, 7):
        assert yaw_residual(a)[0] == pytest.approx(float(np.sum((rot(a) - np.eye(2)) ** 2)), abs=1e-12)


def test_midend_straight_line():
    nodes = np.column_stack([np.linspace(0, 5, 11), np.zeros(11), np.full(11, 0.3)])
    res = midend_fit(nodes)
    tr = res.trajectory
    ts = np.linspace(0, tr.total_time, 500)
    p = tr.sample(ts)
    assert np.max(np.abs(p[:, 1])) <= 1e-9
    assert np.max(np.abs(p[:, 2] - 0.3)) <= 1e-9
    assert res.costs["attitude_residual"] <= 1e-6
    # nearest-node association leaves at most one node spacing of lag
    assert max_position_residual(initial_fit(nodes, CFG), tr, CFG.kappa) <= 0.5
    assert np.all(np.diff(p[:, 0]) >= -1e-9)


def test_midend_objective_monotone():
    rng = np.random.default_rng(0)
    nodes = np.column_stack([np.cumsum(rng.uniform(0.3, 1.0, 10)), np.cumsum(rng.normal(0, 0.3, 10)),
                             np.cumsum(rng.normal(0, 0.2, 10))])
    res = midend_fit(nodes)
    h = res.history
    assert all(b <= a for a, b in zip(h, h[1:]))
    assert len(res.residual_history) == res.iterations
    assert h[-1] < h[0]
    assert np.min(res.trajectory.durations) > 0.02


def test_midend_needs_two_nodes():
    with pytest.raises(ValueError):
        midend_fit(np.zeros((1, 3)))


# ---------------------------------------------------------------------------
# back-end
# ---------------------------------------------------------------------------


def rows_with_values(vals):
    rows = np.zeros((len(vals), 9))
    rows[:, 0] = rows[:, 8] = vals
    return rows


def test_obstacle_penalty_examples():
    v, d = obstacle_values(rows_with_values([CFG.s_thr + 0.1, CFG.s_thr - 0.2]), CFG)
    assert v[0] == 0.0 and d[0] == 0.0
    # 0.2 before smoothing; past the smoothing band the hinge is x - mu / 2
    assert v[1] == pytest.approx(0.2 - CFG.mu / 2, abs=1e-12)
    assert d[1] == -1.0


def test_no_obstacles_respects_speed_limit():
    scene = Scene(np.zeros((60, 100), bool), (0, 0), 0.1, (1, 3, 0), (9, 3, 0))
    q = np.array([[3, 3, 0], [5, 3, 0], [7, 3, 0]], float)
    init = minco_construct(Boundary.rest([1, 3, 0], [9, 3, 0]), q, [0.3] * 4)
    v0 = np.linalg.norm(init.sample(np.linspace(0, init.total_time, 2001), 1)[:, :2], axis=1)
    assert v0.max() > CFG.v_m
    res = backend_optimize(init, scene, planner_robot())
    tr = res.trajectory
    v = np.linalg.norm(tr.sample(np.linspace(0, tr.total_time, 20001), 1)[:, :2], axis=1)
    assert v.max() <= CFG.v_m + 1e-3
    assert res.report.obstacle_cost == 0.0 and res.report.min_svsdf == math.inf


def three_segment_instance(n_points=30):
    shape = l_shape(1.0, 0.4)
    b = Boundary.rest([0, 0, 0], [4, 0.5, 1.0])
    q = np.array([[1.3, 0.4, 0.3], [2.7, 0.2, 0.7]])
    T = np.array([2.0, 1.8, 2.1])
    tr = minco_construct(b, q, T)
    rng = np.random.default_rng(3)
    cand = rng.uniform([-1, -2], [5, 2.5], (4000, 2))
    g = metric_g_batch(sweep_problem(shape, tr), cand)[:, 0]
    # outside the swept volume but inside the penalty band
    pts = cand[(g > 0.05) & (g < CFG.s_thr - 0.05)][:n_points]
    return shape, tr, pts, WaypointParams.from_durations(q, T).pack()


def test_backend_gradient_matches_fd():
    shape, tr, pts, x = three_segment_instance()
    obj = BackendObjective(tr, ObstacleTerm(shape, pts, CFG, warm_start=False), CFG)
    f, g = obj(x, remember=False)
    assert obj.parts["obstacle"] > 0
    fd = central_fd(lambda y: obj(y, remember=False)[0], x, 1e-6)
    assert np.linalg.norm(g - fd) <= 5e-3 * np.linalg.norm(fd)


def test_backend_objective_monotone_and_warm_start_consistent():
    shape, tr, pts, x = three_segment_instance()
    obj = BackendObjective(tr, ObstacleTerm(shape, pts, CFG, warm_start=True), CFG)
    res = lbfgs_minimize(obj, x)
    h = res.history
    assert all(b <= a for a, b in zip(h, h[1:]))
    assert h[-1] < h[0]
    # the warm-started value at the final point equals a cold evaluation within epsilon
    cold = ObstacleTerm(shape, pts, CFG, warm_start=False)
    final = obj.trajectory(res.x)
    vw = obj.term.evaluate(final)[3][:, 8]
    vc = cold.evaluate(final)[3][:, 8]
    assert np.max(np.abs(vw - vc)) <= CFG.gsip_epsilon


def test_backend_rejects_bad_input():
    scene = Scene(np.zeros((10, 10), bool))
    shape, tr, _, _ = three_segment_instance(1)
    with pytest.raises(ValueError):
        backend_optimize(tr, scene, Shape.time_varying_disk(0.2, 0.3))


# ---------------------------------------------------------------------------
# independent check
# ---------------------------------------------------------------------------


def test_cca_verify_examples():
    capsule = Motion.linear((0, 0, 0), (4, 0, 0))
    occ = np.zeros((40, 80), bool)
    scene = Scene(occ, (-2.0, -2.0), 0.1)
    ok, c = cca_verify(capsule, scene, Shape.disk(1.0))
    assert ok and c == math.inf
    occ[20, 40] = True  # centre (2.05, 0.05): inside the capsule
    ok, c = cca_verify(capsule, Scene(occ, (-2.0, -2.0), 0.1), Shape.disk(1.0))
    # dense sampling: within the distance travelled in one time step (4 m / 1e4)
    assert not ok and c == pytest.approx(0.05 - 1.0, abs=4e-4)
    with pytest.raises(ValueError):
        cca_verify(capsule, scene, Shape.disk(1.0), time_samples=100)


def test_cca_clearance_agrees_with_svsdf():
    case = rotating_l_case()
    pr = case.problem
    eps = GsipConfig().epsilon
    rng = np.random.default_rng(5)
    pts = rng.uniform([-2.5, -3.5], [5.5, 4.5], (200, 2))
    dense = dense_clearance(pr.motion, pr.shape, pts)[:, 0]
    for p, d in zip(pts, dense):
        v = svsdf_query(pr, p).value
        if v > 0:
            assert abs(d - v) <= 2 * eps
        else:
            # inside, the per-instant distance is only an upper bound of the depth
            assert d <= 2 * eps and d >= v - 2 * eps


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


def test_plan_empty_map():
    scene = Scene(np.zeros((50, 80), bool), (0, 0), 0.1, (1.5, 2.5, 0.0), (6.5, 2.5, 1.0))
    r = plan(scene, planner_robot())
    assert r.report["success"] and r.report["cca_pass"]
    assert r.report["min_clearance"] is None
    tr = r.trajectory
    assert np.allclose(tr.eval(0.0), scene.start, atol=1e-9)
    assert np.allclose(tr.eval(tr.total_time), scene.goal, atol=1e-9)


def test_plan_walled_map():
    occ = np.zeros((50, 80), bool)
    occ[:, 40] = True
    scene = Scene(occ, (0, 0), 0.1, (1.5, 2.5, 0.0), (6.5, 2.5, 0.0))
    with pytest.raises(NoPathError):
        plan(scene, planner_robot())


def test_plan_slot_scene():
    occ = np.zeros((60, 80), bool)
    occ[29:31, :] = True
    occ[29:31, 35:45] = False  # 1 m gap; the 1.2 m bar must turn to pass
    scene = Scene(occ, (0, 0), 0.1, (2.0, 1.5, 0.0), (6.0, 4.5, 0.0))
    r = plan(scene, Shape.box((0.6, 0.15)))
    assert r.report["success"] and r.report["cca_pass"]
    assert r.report["min_clearance"] > 0


def test_plan_report_consistency_and_determinism():
    scene = random_scene(7)
    shape = planner_robot()
    a = plan(scene, shape)
    b = plan(scene, shape)
    assert report_json(a.report, include_timing=False) == report_json(b.report, include_timing=False)
    assert np.array_equal(a.trajectory.coeffs, b.trajectory.coeffs)
    rep = a.backend
    assert (rep.obstacle_cost == 0.0) == (rep.min_svsdf >= CFG.s_thr)
    if a.report["success"]:
        assert a.report["cca_pass"]


def test_random_scene_is_seeded():
    a, b, c = random_scene(11), random_scene(11), random_scene(12)
    assert a.same_as(b) and not a.same_as(c)
    m = build_masks(planner_robot(), a.cell_size, 36)
    for pose in (a.start, a.goal):
        ix, iy = a.cell_of(pose[0], pose[1])
        assert not collide(m, a, ix, iy, m.channel_of(pose[2]))
    empty = random_scene(1, MapSpec(density=0.0))
    assert not empty.occupancy.any()


def test_scene_points():
    occ = np.zeros((4, 5), bool)
    occ[1:4, 1:4] = True
    s = Scene(occ, (1.0, 2.0), 0.5)
    assert len(s.obstacle_points) == 9
    assert np.allclose(s.obstacle_points[0], [1.75, 2.75])
    # the top row touches the map edge, which counts as occupied
    assert len(s.boundary_points) == 7


def test_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(kappa=3)
    with pytest.raises(ValueError):
        PlannerConfig(lambda_o=-1.0)
    with pytest.raises(KeyError):
        CFG.with_overrides({"nope": 1})
    assert CFG.with_overrides({"kappa": "16"}).kappa == 16
