import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sweptsdf import (ConsistencyError, GridSpec, GsipConfig, Motion, NonConvergenceError, Shape, SweepProblem,
                      brute_force_svsdf, metric_g, svsdf_grid, svsdf_points, svsdf_query)
from sweptsdf.cases import segment_distance
from sweptsdf.svsdf import boundary_band, field_to_pgm, load_field, occupancy_sdf, rasterize_sweep, save_field
from sweptsdf.io import read_pgm

EPS = GsipConfig().epsilon


def static_disk(radius=1.0):
    return SweepProblem(Shape.disk(radius), Motion.constant((0, 0, 0)))


def capsule():
    return SweepProblem(Shape.disk(1.0), Motion.linear((0, 0, 0), (4, 0, 0)))


def test_static_disk_interior():
    r = svsdf_query(static_disk(), [0.5, 0.0])
    assert r.status == "interior"
    assert -0.5 - EPS <= r.value <= -0.5 + 1e-12
    assert np.linalg.norm(r.gradient) == pytest.approx(1.0)


@pytest.mark.parametrize("p, expected", [((2.0, 0.0), -1.0), ((2.0, 0.5), -0.5), ((2.0, 3.0), 2.0)])
def test_capsule_examples(p, expected):
    r = svsdf_query(capsule(), p)
    if expected > 0:
        assert r.value == pytest.approx(expected, abs=1e-9)
        assert r.iterations == 0 and r.status == "exterior"
    else:
        # -r_K is never shallower than the true depth and is within epsilon of it
        assert expected - EPS <= r.value <= expected + 1e-9


def test_up_update_unit():
    # disk of radius 2, p at depth 1.5: max g over the ball of radius r is r - 1.5
    r = svsdf_query(static_disk(2.0), [0.5, 0.0], initial_radius=2.0)
    assert r.radii[0] == 2.0
    assert r.violations[0] == pytest.approx(0.5, abs=1e-9)
    assert r.radii[1] == pytest.approx(1.5, abs=1e-9)
    assert r.radii[1] == r.radii[0] - r.violations[0]
    assert r.value == pytest.approx(-1.5, abs=1e-9)


def test_termination_unit():
    # initial radius overshoots the depth by epsilon / 2: the first lower-level
    # maximum is epsilon / 2 < epsilon, so the solver returns -r_0
    r0 = 0.5 + EPS / 2
    r = svsdf_query(static_disk(), [0.5, 0.0], initial_radius=r0)
    assert r.iterations == 1
    assert r.violations[0] == pytest.approx(EPS / 2, abs=1e-9)
    assert r.value == -r0


def test_exterior_equals_metric(rotating_l):
    pr = rotating_l.problem
    for p in ([6.0, 0.0], [-2.4, 3.0], [2.0, -3.3]):
        g = metric_g(pr, p).g_value
        r = svsdf_query(pr, p)
        assert g > 0 and r.value == g


def test_boundary_point_shortcut():
    r = svsdf_query(static_disk(), [1.0, 0.0])
    assert r.iterations == 0 and r.value == 0.0 and r.status == "boundary"


def check_result(pr, p, r, eps):
    g = metric_g(pr, p).g_value
    if r.value > 0:
        assert r.value == g
        return
    # strictly decreasing radii, each step exactly the lower-level maximum
    radii, viol = r.radii, r.violations
    assert len(radii) == r.iterations
    for k in range(len(radii) - 1):
        assert viol[k] >= eps
        assert radii[k + 1] == radii[k] - viol[k]
        assert radii[k + 1] < radii[k]
    if r.iterations:
        assert viol[-1] < eps
        assert r.value == -radii[-1]
        assert [metric_g(pr, q).g_value for q in r.lp_points] == list(viol)
        assert abs(metric_g(pr, r.tangent_point).g_value) <= eps
        assert np.linalg.norm(np.asarray(r.tangent_point) - p) <= radii[-1] * (1 + 1e-9)
    # g bounds the swept-volume distance from above inside
    assert g >= r.value - eps
    assert np.linalg.norm(r.gradient) == pytest.approx(1.0, abs=1e-9)


@given(st.floats(-2.4, 5.4), st.floats(-3.4, 4.4))
def test_query_invariants_rotating_l(x, y):
    from sweptsdf.cases import rotating_l_case
    pr = rotating_l_case().problem
    p = np.array([x, y])
    check_result(pr, p, svsdf_query(pr, p), EPS)


def test_capsule_grid_matches_closed_form(capsule):
    f = svsdf_grid(capsule.problem, grid=capsule.grid)
    exact = capsule.exact(capsule.grid.centers())
    assert f.n_failed == 0
    assert np.max(np.abs(f.values - exact)) <= max(EPS, capsule.grid.diagonal)


def small_grid(case, factor=3):
    g = case.grid
    return GridSpec(g.origin, g.cell_size * factor, g.nx // factor, g.ny // factor)


def test_warm_matches_cold(rotating_l):
    grid = small_grid(rotating_l)
    warm = svsdf_grid(rotating_l.problem, grid=grid, warm_start=True)
    cold = svsdf_grid(rotating_l.problem, grid=grid, warm_start=False)
    assert warm.n_failed == 0 and cold.n_failed == 0
    assert np.max(np.abs(warm.values - cold.values)) <= EPS
    # exterior cells never go through the solver, so they agree exactly
    ext = cold.values > 0
    assert np.array_equal(warm.values[ext], cold.values[ext])


def test_blocks_match_single_worker(rotating_l):
    grid = small_grid(rotating_l)
    one = svsdf_grid(rotating_l.problem, grid=grid, warm_start=False, workers=1)
    three = svsdf_grid(rotating_l.problem, grid=grid, warm_start=False, workers=3)
    assert np.array_equal(one.values, three.values)
    warm = svsdf_grid(rotating_l.problem, grid=grid, warm_start=True, workers=3)
    assert np.max(np.abs(warm.values - one.values)) <= EPS


def test_grid_cells_match_single_queries(rotating_l):
    grid = small_grid(rotating_l, 5)
    f = svsdf_grid(rotating_l.problem, grid=grid, warm_start=False)
    c = grid.centers()
    for iy in range(0, grid.ny, 4):
        for ix in range(0, grid.nx, 4):
            r = svsdf_query(rotating_l.problem, c[iy, ix])
            assert f.values[iy, ix] == r.value
            assert f.result(ix, iy).value == r.value


def test_points_batch_matches_queries(rotating_l, rng):
    pts = rng.uniform([-2.5, -3.5], [5.5, 4.5], (40, 2))
    rows = svsdf_points(rotating_l.problem, pts)
    for p, row in zip(pts, rows):
        assert row[0] == svsdf_query(rotating_l.problem, p).value


def test_points_skip_above(capsule):
    rows = svsdf_points(capsule.problem, [[2.0, 10.0], [2.0, 0.0]], skip_above=3.0)
    assert rows[0, 7] == 3 and rows[0, 0] > 3.0
    assert rows[1, 0] < 0


def test_brute_force_static_disk():
    grid = GridSpec((-2.0, -2.0), 0.08, 50, 50)
    bf = brute_force_svsdf(static_disk(), grid, 1000)
    exact = np.linalg.norm(grid.centers(), axis=-1) - 1.0
    assert np.max(np.abs(bf - exact)) <= grid.diagonal


def test_brute_force_capsule(capsule):
    bf = brute_force_svsdf(capsule.problem, capsule.grid)
    exact = capsule.exact(capsule.grid.centers())
    assert np.max(np.abs(bf - exact)) <= capsule.grid.diagonal


def test_brute_force_rejects_few_samples(capsule):
    with pytest.raises(ValueError):
        brute_force_svsdf(capsule.problem, capsule.grid, 999)


def test_sign_agrees_with_raster(rotating_l):
    grid = small_grid(rotating_l, 2)
    f = svsdf_grid(rotating_l.problem, grid=grid)
    occ = rasterize_sweep(rotating_l.problem, grid)
    far = ~boundary_band(occ, 1.5)
    assert np.all((f.values[far] <= 0) == occ[far])


def test_occupancy_sdf_edges():
    assert np.all(np.isinf(occupancy_sdf(np.zeros((3, 3), bool), 0.1)))
    occ = np.zeros((5, 5), bool)
    occ[2, 2] = True
    d = occupancy_sdf(occ, 1.0)
    assert d[2, 2] == -0.5 and d[2, 3] == 0.5


def test_nonconvergence_carries_state():
    cfg = GsipConfig(max_iterations=1)
    with pytest.raises(NonConvergenceError) as e:
        svsdf_query(static_disk(), [0.5, 0.0], cfg, initial_radius=50.0)
    assert e.value.radius == pytest.approx(0.5, abs=1e-6)
    assert e.value.violation == pytest.approx(49.5, abs=1e-6)


def test_grid_marks_failed_cells():
    cfg = GsipConfig(max_iterations=1, initial_radius=50.0)
    grid = GridSpec((-1.0, -1.0), 0.5, 4, 4)
    f = svsdf_grid(static_disk(), cfg, grid, warm_start=False)
    assert f.n_failed > 0
    ext = f.values > 0
    assert not np.any(f.failed[ext])
    iy, ix = np.argwhere(f.failed)[0]
    with pytest.raises(NonConvergenceError):
        f.result(int(ix), int(iy))


def test_negative_radius_is_reported(monkeypatch):
    from sweptsdf import _kernels as K

    def fake(*a):
        return K.STATUS_NEGATIVE_RADIUS, 0.1, 0.0, 0.0, 0.0, 1.0, 0.0, 1, 0.0
    monkeypatch.setattr(K, "gsip", fake)
    with pytest.raises(ConsistencyError):
        svsdf_query(static_disk(), [0.5, 0.0])


def test_invalid_inputs(capsule):
    with pytest.raises(ValueError):
        svsdf_query(capsule.problem, [np.nan, 0.0])
    with pytest.raises(ValueError):
        svsdf_query(capsule.problem, [0.0, 0.0], initial_radius=-1.0)
    with pytest.raises(ValueError):
        GsipConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        GsipConfig(samples_angular=4)
    with pytest.raises(ValueError):
        GridSpec((0, 0), 0.1, 0, 3)
    with pytest.raises(ValueError):
        svsdf_grid(capsule.problem)


def test_field_save_load_and_pgm(tmp_path, capsule):
    grid = small_grid(capsule, 4)
    f = svsdf_grid(capsule.problem, grid=grid)
    save_field(tmp_path / "f.f32", f.values, grid)
    v, g2 = load_field(tmp_path / "f.f32")
    assert g2 == grid
    assert np.array_equal(v, f.values.astype(np.float32))
    field_to_pgm(tmp_path / "f.pgm", f.values)
    img = read_pgm(tmp_path / "f.pgm")
    assert img.shape == (grid.ny, grid.nx)
    # top image row is the largest y
    assert img[0, 0] == np.flipud(img)[-1, 0]
    lo = np.unravel_index(np.argmin(f.values), f.values.shape)
    assert np.flipud(img)[lo] == 0
    assert img.max() == 255


def test_closed_form_reference_helper():
    d = segment_distance(np.array([[2.0, 1.0], [-1.0, 0.0], [5.0, 0.0]]), (0, 0), (4, 0))
    assert np.allclose(d, [1.0, 1.0, 1.0])
