"""Mid-end: fit a smooth (x, y, yaw) trajectory to the A* pose sequence.

Cost = lambda_m * jerk effort + lambda_t * total time + lambda_p * position
residual + lambda_R * attitude residual. Each residual compares the
trajectory with the key node nearest in (normalized) time and passes
through the smoothed L1 hinge.

Residual samples sit at fixed slots (segment i, fraction j/kappa). Their node
association and quadrature weight come from the initial time allocation and
stay fixed, so the objective is smooth in T and a segment cannot lower its
residual by shrinking.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..optimizer import LbfgsConfig, lbfgs_minimize, smoothed_l1
from ..traj import (Boundary, PolyTrajectory, WaypointParams, control_effort, dT_dtau,
                    minco_construct, propagate_gradient)
from .costs import Samples, accumulate, take_samples, yaw_residual
from .scene import PlannerConfig

log = logging.getLogger(__name__)


def align_yaws(nodes: NDArray[np.float64], start_yaw: float, goal_yaw: float):
    """Shift the (unwrapped) node yaws by whole turns to start near start_yaw;
    return them with the goal yaw moved to the turn nearest the last node."""
    yaw = np.unwrap(nodes[:, 2])
    yaw = yaw + 2 * math.pi * round((start_yaw - yaw[0]) / (2 * math.pi))
    goal = goal_yaw + 2 * math.pi * round((yaw[-1] - goal_yaw) / (2 * math.pi))
    return yaw, goal


@dataclass
class FitProblem:
    """Everything fixed during a fit: boundary, node targets and their
    normalized timestamps."""

    boundary: Boundary
    node_xy: NDArray[np.float64]
    node_yaw: NDArray[np.float64]
    node_u: NDArray[np.float64]  # arc-length fraction of each node in [0, 1]
    q0: NDArray[np.float64]
    T0: NDArray[np.float64]

    def node_index(self, u: NDArray[np.float64]) -> NDArray[np.int64]:
        """Nearest node by normalized timestamp."""
        mids = 0.5 * (self.node_u[1:] + self.node_u[:-1])
        return np.searchsorted(mids, u, side="left")

    def slot_weights(self, s: Samples) -> NDArray[np.float64]:
        """Trapezoid weights of the initial allocation, held fixed so that
        shrinking a segment cannot hide its residual."""
        return s.trap * self.T0[s.seg] / s.kappa

    def slot_nodes(self, s: Samples) -> NDArray[np.int64]:
        """Node of each sample slot, fixed by the initial (uniform) time
        allocation so the association does not jump while T changes."""
        N = len(self.T0)
        return self.node_index((s.seg + s.frac) / N)


def initial_fit(nodes: ArrayLike, config: PlannerConfig, start=None, goal=None) -> FitProblem:
    """Segments of about ``segment_length`` along the node polyline, timed at
    half the speed limit."""
    nodes = np.array(nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != 3 or len(nodes) < 2:
        raise ValueError("need at least two (x, y, yaw) nodes")
    start = tuple(nodes[0]) if start is None else tuple(start)
    goal = tuple(nodes[-1]) if goal is None else tuple(goal)
    yaw, goal_yaw = align_yaws(nodes, start[2], goal[2])
    xy = nodes[:, :2].copy()
    xy[0] = start[:2]
    xy[-1] = goal[:2]
    yaw[0] = start[2]
    yaw[-1] = goal_yaw
    seg = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    L = float(s[-1])
    # arc length plus a rotation allowance, so turning in place still gets time
    turn = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(yaw)))])
    sr = s + 0.5 * turn
    Lr = float(sr[-1])
    N = max(1, int(round(Lr / config.segment_length)))
    u_knots = np.linspace(0.0, Lr, N + 1)[1:-1]
    q = np.column_stack([np.interp(u_knots, sr, xy[:, 0]), np.interp(u_knots, sr, xy[:, 1]),
                         np.interp(u_knots, sr, yaw)])
    speed = 0.5 * config.v_m
    T = np.full(N, max(Lr / N / speed, 0.05))
    node_u = sr / Lr if Lr > 0 else np.linspace(0.0, 1.0, len(sr))
    boundary = Boundary.rest([start[0], start[1], start[2]], [goal[0], goal[1], goal_yaw])
    return FitProblem(boundary, xy, yaw, node_u, q.reshape(N - 1, 3), T)


def residual_cost(prob: FitProblem, cfg: PlannerConfig):
    def cost(s: Samples):
        S, m = s.derivs.shape[1:]
        idx = prob.slot_nodes(s)
        p = s.derivs[0]
        d = p[:, :2] - prob.node_xy[idx]
        xp = np.sum(d * d, axis=1)
        vp, gp = smoothed_l1(xp, cfg.mu)
        xr, dxr = yaw_residual(p[:, 2] - prob.node_yaw[idx])
        vr, gr = smoothed_l1(xr, cfg.mu)
        F = cfg.lambda_p * vp + cfg.lambda_R * vr
        dF = np.zeros((4, S, m))
        dF[0, :, :2] = (cfg.lambda_p * gp)[:, None] * 2.0 * d
        dF[0, :, 2] = cfg.lambda_R * gr * dxr
        return F, dF

    return cost


def residual_parts(prob: FitProblem, traj: PolyTrajectory, cfg: PlannerConfig) -> tuple[float, float]:
    """Weighted position and attitude residual sums of a fitted trajectory."""
    s = take_samples(traj, cfg.kappa)
    idx = prob.slot_nodes(s)
    w = prob.slot_weights(s)
    p = s.derivs[0]
    d = p[:, :2] - prob.node_xy[idx]
    vp = smoothed_l1(np.sum(d * d, axis=1), cfg.mu)[0]
    vr = smoothed_l1(yaw_residual(p[:, 2] - prob.node_yaw[idx])[0], cfg.mu)[0]
    return float(cfg.lambda_p * np.sum(w * vp)), float(cfg.lambda_R * np.sum(w * vr))


def max_position_residual(prob: FitProblem, traj: PolyTrajectory, kappa: int) -> float:
    s = take_samples(traj, kappa)
    idx = prob.slot_nodes(s)
    return float(np.max(np.linalg.norm(s.derivs[0][:, :2] - prob.node_xy[idx], axis=1)))


@dataclass
class MidendResult:
    trajectory: PolyTrajectory
    status: str
    iterations: int
    evaluations: int
    history: list[float]
    residual_history: list[float] = field(default_factory=list)
    costs: dict = field(default_factory=dict)


def midend_objective(prob: FitProblem, cfg: PlannerConfig):
    N = len(prob.T0)

    def fun(x):
        w = WaypointParams.unpack(x, N, 3)
        T = w.T
        traj = minco_construct(prob.boundary, w.q, T)
        Jm, dc_m, dT_m = control_effort(traj)
        s = take_samples(traj, cfg.kappa)
        Jr, dc_r, dT_r = accumulate(traj, s, residual_cost(prob, cfg), prob.slot_weights(s))
        f = cfg.lambda_m * Jm + cfg.lambda_t * traj.total_time + Jr
        dq, dT = propagate_gradient(traj, cfg.lambda_m * dc_m + dc_r,
                                    cfg.lambda_m * dT_m + cfg.lambda_t + dT_r)
        return f, np.concatenate([dq.ravel(), dT * dT_dtau(w.tau)])

    return fun


def midend_fit(nodes: ArrayLike, config: Optional[PlannerConfig] = None, start=None, goal=None,
               lbfgs: Optional[LbfgsConfig] = None) -> MidendResult:
    """Fit the trajectory; on optimizer trouble the best point found is kept
    and the status says why."""
    cfg = config or PlannerConfig()
    prob = initial_fit(nodes, cfg, start, goal)
    N = len(prob.T0)
    fun = midend_objective(prob, cfg)
    x0 = WaypointParams.from_durations(prob.q0, prob.T0).pack()
    residuals: list[float] = []

    def track(x, f):
        w = WaypointParams.unpack(x, N, 3)
        residuals.append(max_position_residual(prob, minco_construct(prob.boundary, w.q, w.T), cfg.kappa))

    opts = lbfgs or LbfgsConfig(memory=24, max_evals=cfg.midend_max_evals, grad_tolerance=1e-5,
                                f_tolerance=1e-6, polish_step=False)
    res = lbfgs_minimize(fun, x0, opts, callback=track)
    if res.status not in ("converged", "stalled"):
        log.warning("mid-end optimizer stopped: %s", res.status)
    w = WaypointParams.unpack(res.x, N, 3)
    traj = minco_construct(prob.boundary, w.q, w.T)
    Jm = control_effort(traj)[0]
    s = take_samples(traj, cfg.kappa)
    Jr = accumulate(traj, s, residual_cost(prob, cfg), prob.slot_weights(s))[0]
    pos, att = residual_parts(prob, traj, cfg)
    costs = {"smoothness": Jm, "time": traj.total_time, "residual": Jr, "position_residual": pos,
             "attitude_residual": att, "total": res.value}
    return MidendResult(traj, res.status, res.iterations, res.evaluations, res.history, residuals, costs)
