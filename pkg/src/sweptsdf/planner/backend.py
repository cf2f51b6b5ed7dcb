"""Back-end: push the swept volume away from obstacle points.

Cost = G_d + lambda_o * G_o + lambda_m * jerk effort + lambda_t * total time
over (q, tau). G_o sums L_mu(s_thr - SVSDF(x_ob)) over obstacle points near
the path; SVSDF comes from GSIP with the motion set to the current
trajectory, re-evaluated per objective evaluation and warm-started from the
previous evaluation at the same point.

The SVSDF value used here is GSIP's certified bound: g(p) outside, and
-(r - g*) inside, where g* is attained at the tangent point q on the final
ball. Both equal g(q*) plus a constant (q* = p outside), so by the envelope
rule the sensitivity is that of sdf(T(t*)^-1 q*) to the pose at t*, with t*
and q* held fixed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from .. import _kernels as K
from ..geometry import Motion, Shape
from ..optimizer import LbfgsConfig, lbfgs_minimize, smoothed_l1
from ..svsdf import GsipConfig, default_initial_radius
from ..sweep import SweepProblem
from ..traj import PolyTrajectory, WaypointParams, control_effort, dT_dtau, minco_construct, propagate_gradient
from .costs import accumulate, dynamics_cost, take_samples
from .scene import PlannerConfig, Scene

log = logging.getLogger(__name__)

SOLVED = (K.STATUS_EXTERIOR, K.STATUS_INTERIOR, K.STATUS_BOUNDARY)


def sweep_problem(shape: Shape, traj: PolyTrajectory) -> SweepProblem:
    """Swept-volume problem of a shape along an (x, y, yaw) trajectory, with
    at least eight coarse time intervals per segment."""
    motion = Motion.from_trajectory(traj)
    n = max(64, 8 * traj.segments)
    return SweepProblem(shape, motion, time_resolution=traj.total_time / n)


def backend_gsip_config(cfg: PlannerConfig) -> GsipConfig:
    """Lighter ball sampling than the field default: the optimizer only
    needs the penalty near s_thr, and each call is repeated every step."""
    return GsipConfig(epsilon=cfg.gsip_epsilon, samples_angular=16, samples_radial=2, refine_steps=4)


def cull_points(points: NDArray[np.float64], traj: PolyTrajectory, shape: Shape, cfg: PlannerConfig):
    """Indices of points within bounding radius + s_thr + cull_margin of the
    path of the body origin. The path is sampled densely and the largest
    sample gap is added to the radius, so no point within reach is missed."""
    if len(points) == 0:
        return np.zeros(0, dtype=np.int64)
    t = np.linspace(0.0, traj.total_time, 32 * traj.segments + 1)
    xy = traj.sample(t)[:, :2]
    gap = float(np.max(np.linalg.norm(np.diff(xy, axis=0), axis=1))) if len(xy) > 1 else 0.0
    pad = shape.bounding_radius + cfg.s_thr + cfg.cull_margin + 0.5 * gap
    near = cKDTree(xy).query(points, distance_upper_bound=pad)[0]
    return np.nonzero(np.isfinite(near))[0]


class ObstacleTerm:
    """lambda_o * sum L_mu(s_thr - SVSDF) over a fixed point set, with warm
    starts carried between calls."""

    def __init__(self, shape: Shape, points: NDArray[np.float64], cfg: PlannerConfig,
                 gsip: Optional[GsipConfig] = None, warm_start: bool = True):
        if shape.time_varying:
            raise ValueError("the planner needs a rigid (time-invariant) shape")
        self.shape = shape
        self.points = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))
        self.cfg = cfg
        self.gsip = gsip or backend_gsip_config(cfg)
        self.warm_start = warm_start
        self.seed = np.full(len(self.points), np.nan)
        self._prev_poses: Optional[NDArray[np.float64]] = None
        self.last: Optional[NDArray[np.float64]] = None

    def _initial_radii(self, problem: SweepProblem, poses: NDArray[np.float64]):
        r_cold = default_initial_radius(problem)
        r = np.full(len(self.points), r_cold)
        if not self.warm_start or self._prev_poses is None or self._prev_poses.shape != poses.shape:
            return r
        # every body point moved by at most |dc| + |dyaw| R between the two paths
        d = poses - self._prev_poses
        move = np.max(np.hypot(d[:, 0], d[:, 1]) + np.abs(d[:, 2]) * self.shape.bounding_radius)
        move = 1.1 * move + 1e-9
        known = np.isfinite(self.seed)
        r[known] = np.minimum(r_cold, np.maximum(move - self.seed[known], self.cfg.s_thr))
        return r

    def evaluate(self, traj: PolyTrajectory, remember: bool = True):
        """Returns (value, dJ/dc, dJ/dT direct, rows) with rows as from
        gsip_batch for every point."""
        N, m = traj.segments, traj.dims
        dc = np.zeros((N, 6, m))
        dT = np.zeros(N)
        if len(self.points) == 0:
            self.last = np.zeros((0, 9))
            return 0.0, dc, dT, self.last
        cfg = self.cfg
        problem = sweep_problem(self.shape, traj)
        poses = take_samples(traj, 8).derivs[0]
        r0 = self._initial_radii(problem, poses)
        rows = K.gsip_batch(*problem.kernel_args(), self.points, r0, cfg.s_thr, *self.gsip.solver_args())
        if remember:
            self._prev_poses = poses
            # column 8 is a lower bound on SVSDF for every row that did not fail
            self.seed = np.where(rows[:, 7] >= 0, rows[:, 8], np.nan)
            self.last = rows
        value, dv = obstacle_values(rows, cfg)
        active = np.nonzero(dv != 0.0)[0]
        total = cfg.lambda_o * float(np.sum(value))
        if active.size:
            w = cfg.lambda_o * dv[active]  # dJ/dSVSDF
            gp = svsdf_pose_gradient(self.shape, traj, rows[active])
            add_pose_gradient(traj, rows[active, 1], w[:, None] * gp, dc, dT)
        return total, dc, dT, rows


def obstacle_values(rows: NDArray[np.float64], cfg: PlannerConfig):
    """Per-row penalty L_mu(s_thr - SVSDF) and its derivative wrt SVSDF."""
    st = rows[:, 7]
    v = np.where(np.isin(st, SOLVED), rows[:, 8], rows[:, 0])
    x = np.where(st == K.STATUS_BOUND_ONLY, -1.0, cfg.s_thr - v)
    val, d = smoothed_l1(x, cfg.mu)
    return np.atleast_1d(val), -np.atleast_1d(d)


def svsdf_values(rows: NDArray[np.float64]) -> NDArray[np.float64]:
    st = rows[:, 7]
    return np.where(np.isin(st, SOLVED), rows[:, 8], rows[:, 0])


def svsdf_pose_gradient(shape: Shape, traj: PolyTrajectory, rows: NDArray[np.float64]):
    """d SVSDF / d pose(t*) as (n, 3) over (x, y, yaw), envelope rule at the
    tangent point (the query point itself outside)."""
    ts = rows[:, 1]
    pose = traj.sample(ts)
    q = rows[:, 2:4]
    c = np.cos(pose[:, 2])
    s = np.sin(pose[:, 2])
    wx = q[:, 0] - pose[:, 0]
    wy = q[:, 1] - pose[:, 1]
    lx = c * wx + s * wy
    ly = -s * wx + c * wy
    g = K.shape_sdf_batch(*shape.arrays, np.ascontiguousarray(np.column_stack([lx, ly])), 0.0)
    nx, ny = g[:, 1], g[:, 2]
    out = np.empty((len(rows), 3))
    out[:, 0] = -(c * nx - s * ny)
    out[:, 1] = -(s * nx + c * ny)
    out[:, 2] = nx * ly - ny * lx
    return out


def add_pose_gradient(traj: PolyTrajectory, ts: NDArray[np.float64], gpose: NDArray[np.float64],
                      dc: NDArray[np.float64], dT: NDArray[np.float64]) -> None:
    """Accumulate sum_j gpose_j . d pose(t_j) into dc and dT, holding each
    sample's local time fixed; a sample at the final instant moves with T_N."""
    N = traj.segments
    idx, tau = traj.locate(ts)
    powers = tau[:, None] ** np.arange(6)
    np.add.at(dc, idx, powers[:, :, None] * gpose[:, None, :])
    at_end = ts >= traj.total_time * (1.0 - 1e-12)
    if np.any(at_end):
        vel = traj.sample(np.full(int(at_end.sum()), traj.total_time), 1)
        dT[N - 1] += float(np.sum(gpose[at_end] * vel))


# ---------------------------------------------------------------------------
# objective and driver
# ---------------------------------------------------------------------------


class BackendObjective:
    """x = (q, tau) -> (f, grad); keeps the last components for reporting."""

    def __init__(self, initial: PolyTrajectory, term: ObstacleTerm, cfg: PlannerConfig):
        self.boundary = initial.boundary
        self.N = initial.segments
        self.m = initial.dims
        self.term = term
        self.cfg = cfg
        self.dyn = dynamics_cost(cfg)
        self.parts: dict[str, float] = {}

    def trajectory(self, x) -> PolyTrajectory:
        w = WaypointParams.unpack(x, self.N, self.m)
        return minco_construct(self.boundary, w.q, w.T)

    def __call__(self, x, remember: bool = True):
        cfg = self.cfg
        w = WaypointParams.unpack(x, self.N, self.m)
        traj = minco_construct(self.boundary, w.q, w.T)
        Jm, dc_m, dT_m = control_effort(traj)
        s = take_samples(traj, cfg.kappa)
        Jd, dc_d, dT_d = accumulate(traj, s, self.dyn)
        Jo, dc_o, dT_o, _ = self.term.evaluate(traj, remember)
        f = cfg.lambda_m * Jm + cfg.lambda_t * traj.total_time + Jd + Jo
        dq, dT = propagate_gradient(traj, cfg.lambda_m * dc_m + dc_d + dc_o,
                                    cfg.lambda_m * dT_m + cfg.lambda_t + dT_d + dT_o)
        self.parts = {"smoothness": cfg.lambda_m * Jm, "time": cfg.lambda_t * traj.total_time,
                      "dynamics": Jd, "obstacle": Jo}
        return f, np.concatenate([dq.ravel(), dT * dT_dtau(w.tau)])


@dataclass
class BackendReport:
    obstacle_cost: float  # final G_o (unweighted)
    min_svsdf: float  # over obstacle points culled around the final path; +inf if none
    status: str
    iterations: int
    evaluations: int
    rounds: int
    active_points: int
    costs: dict = field(default_factory=dict)
    history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"obstacle_cost": self.obstacle_cost, "min_svsdf": self.min_svsdf, "status": self.status,
                "iterations": self.iterations, "evaluations": self.evaluations, "rounds": self.rounds,
                "active_points": self.active_points, "costs": dict(self.costs)}


@dataclass
class BackendResult:
    trajectory: PolyTrajectory
    report: BackendReport


def backend_optimize(initial: PolyTrajectory, scene: Scene, shape: Shape,
                     config: Optional[PlannerConfig] = None, lbfgs: Optional[LbfgsConfig] = None,
                     warm_start: bool = True, points: Optional[NDArray[np.float64]] = None) -> BackendResult:
    """Refine ``initial`` against the scene's obstacle points.

    ``points`` overrides the obstacle sample set (default: occupied cells
    with a free neighbour). Runs up to ``backend_rounds`` optimizer rounds,
    re-culling the points and clearing the curvature memory between rounds;
    a further round runs only while some point is still in collision.
    """
    cfg = config or PlannerConfig()
    if shape.time_varying:
        raise ValueError("the planner needs a rigid (time-invariant) shape")
    if not (np.all(np.isfinite(initial.coeffs)) and np.all(np.isfinite(initial.durations))):
        raise ValueError("initial trajectory is not finite")
    pts_all = scene.boundary_points if points is None else np.asarray(points, dtype=float).reshape(-1, 2)
    opts = lbfgs or LbfgsConfig(memory=24, max_evals=cfg.backend_max_evals, grad_tolerance=1e-5,
                                f_tolerance=1e-6, max_displacement=cfg.backend_max_step,
                                polish_step=False)
    x = WaypointParams.from_durations(initial.waypoints, initial.durations).pack()
    traj = initial
    history: list[float] = []
    iterations = evaluations = 0
    status = "converged"
    rounds = 0
    term = None
    obj = None
    for rnd in range(max(1, cfg.backend_rounds)):
        rounds = rnd + 1
        sel = cull_points(pts_all, traj, shape, cfg)
        term = ObstacleTerm(shape, pts_all[sel], cfg, warm_start=warm_start)
        obj = BackendObjective(traj, term, cfg)
        res = lbfgs_minimize(obj, x, opts)
        x = res.x
        traj = obj.trajectory(x)
        history.extend(res.history if not history else res.history[1:])
        iterations += res.iterations
        evaluations += res.evaluations
        status = res.status
        # final state of this round, evaluated afresh on points re-culled
        # around the final path (it may have left the round's cull region)
        term = ObstacleTerm(shape, pts_all[cull_points(pts_all, traj, shape, cfg)], cfg, warm_start=False)
        obj = BackendObjective(traj, term, cfg)
        obj(x, remember=True)
        if not np.any(svsdf_values(term.last) <= 0.0):
            break
    if status not in ("converged", "stalled"):
        log.warning("back-end optimizer stopped: %s", status)
    rows = term.last
    values = obstacle_values(rows, cfg)[0]
    sv = svsdf_values(rows)
    report = BackendReport(
        obstacle_cost=float(np.sum(values)), min_svsdf=float(sv.min()) if sv.size else math.inf,
        status=status, iterations=iterations, evaluations=evaluations, rounds=rounds,
        active_points=int(np.count_nonzero(values > 0)), costs=dict(obj.parts), history=history)
    return BackendResult(traj, report)
