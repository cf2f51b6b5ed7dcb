"""Front-end -> mid-end -> back-end -> independent check, with a JSON report."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from .. import _kernels as K
from ..errors import PlanningError
from ..geometry import Shape
from ..traj import PolyTrajectory, control_effort, minco_construct
from .backend import BackendReport, backend_optimize, sweep_problem
from .costs import accumulate, dynamics_cost, take_samples
from .frontend import AStarResult, PoseChannelMasks, astar_search, build_masks
from .midend import MidendResult, initial_fit, midend_fit
from .scene import PlannerConfig, Scene
from .verify import cca_verify

TIMING_KEYS = ("wall_time_ms", "stage_ms")


@dataclass
class PlanResult:
    astar: AStarResult
    initial: PolyTrajectory  # mid-end output (or the unfitted guess without a mid-end)
    trajectory: PolyTrajectory  # final
    midend: Optional[MidendResult]
    backend: Optional[BackendReport]
    report: dict[str, Any] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return bool(self.report["success"])


def min_metric(traj: PolyTrajectory, shape: Shape, points: NDArray[np.float64]) -> float:
    """min over points of the conservative metric g (global in time); +inf
    without points. g > 0 at every obstacle point means the motion is
    collision-free."""
    if len(points) == 0:
        return math.inf
    pr = sweep_problem(shape, traj)
    rows = K.metric_batch(*pr.kernel_args(), True, np.ascontiguousarray(points, dtype=float))
    return float(rows[:, 0].min())


def trajectory_costs(traj: PolyTrajectory, cfg: PlannerConfig) -> dict[str, float]:
    s = take_samples(traj, cfg.kappa)
    v = traj.sample(np.linspace(0.0, traj.total_time, 2001), 1)[:, :2]
    return {"smoothness": float(cfg.lambda_m * control_effort(traj)[0]),
            "time": float(cfg.lambda_t * traj.total_time),
            "dynamics": float(accumulate(traj, s, dynamics_cost(cfg))[0]),
            "total_time_s": float(traj.total_time),
            "max_speed": float(np.max(np.linalg.norm(v, axis=1)))}


def _finite_or_none(x: float) -> Optional[float]:
    return float(x) if math.isfinite(x) else None


def search_with_clearance(scene: Scene, masks: PoseChannelMasks, cfg: PlannerConfig) -> AStarResult:
    """A* on obstacles grown by frontend_inflation, then half of it, then
    the bare map; the first level that yields a path wins."""
    levels = [cfg.frontend_inflation, 0.5 * cfg.frontend_inflation] if cfg.frontend_inflation > 0 else []
    for margin in levels:
        try:
            return astar_search(scene, masks, scene.start, scene.goal, max_yaw_step=cfg.max_yaw_step,
                                inflation=margin)
        except PlanningError:
            continue
    return astar_search(scene, masks, scene.start, scene.goal, max_yaw_step=cfg.max_yaw_step)


def plan(scene: Scene, shape: Shape, config: Optional[PlannerConfig] = None, *, use_midend: bool = True,
         use_backend: bool = True, warm_start: bool = True,
         masks: Optional[PoseChannelMasks] = None) -> PlanResult:
    """Run the planner on a scene.

    The planner reports success when the conservative metric is positive at
    every obstacle point; the report also carries the dense-sampling check.

    Raises:
        NoPathError, InvalidStartError, InvalidGoalError: from the front-end.
    """
    cfg = config or PlannerConfig()
    t0 = time.perf_counter()
    masks = masks or build_masks(shape, scene.cell_size, cfg.yaw_channels)
    astar = search_with_clearance(scene, masks, cfg)
    nodes = astar.nodes
    if len(nodes) < 2:
        nodes = np.array([scene.start, scene.goal], dtype=float)
    t1 = time.perf_counter()
    mid = None
    if use_midend:
        mid = midend_fit(nodes, cfg, scene.start, scene.goal)
        initial = mid.trajectory
    else:
        prob = initial_fit(nodes, cfg, scene.start, scene.goal)
        initial = minco_construct(prob.boundary, prob.q0, prob.T0)
    t2 = time.perf_counter()
    back = None
    traj = initial
    if use_backend:
        res = backend_optimize(initial, scene, shape, cfg, warm_start=warm_start)
        traj, back = res.trajectory, res.report
    t3 = time.perf_counter()
    planner_min = min_metric(traj, shape, scene.boundary_points)
    cca_pass, clearance = cca_verify(traj, scene, shape, cfg.verify_samples)
    t4 = time.perf_counter()
    costs = trajectory_costs(traj, cfg)
    if back is not None:
        costs["obstacle"] = back.obstacle_cost
        costs["min_svsdf"] = _finite_or_none(back.min_svsdf)
    report = {
        "success": bool(planner_min > 0.0),
        "cca_pass": bool(cca_pass),
        "min_clearance": _finite_or_none(clearance),
        "planner_min_g": _finite_or_none(planner_min),
        "iterations": {"midend": mid.iterations if mid else 0, "backend": back.iterations if back else 0},
        "evaluations": {"midend": mid.evaluations if mid else 0, "backend": back.evaluations if back else 0},
        "status": {"midend": mid.status if mid else "skipped", "backend": back.status if back else "skipped"},
        "astar": {"nodes": int(len(astar.nodes)), "expanded": int(astar.expanded)},
        "segments": int(traj.segments),
        "final_costs": costs,
        "wall_time_ms": 1e3 * (t4 - t0),
        "stage_ms": {"frontend": 1e3 * (t1 - t0), "midend": 1e3 * (t2 - t1), "backend": 1e3 * (t3 - t2),
                     "verify": 1e3 * (t4 - t3)},
    }
    return PlanResult(astar, initial, traj, mid, back, report)


def failure_report(reason: str, wall_time_ms: float = 0.0) -> dict[str, Any]:
    """Report for a run that produced no trajectory (no path, bad poses)."""
    return {"success": False, "cca_pass": False, "min_clearance": None, "planner_min_g": None,
            "iterations": {"midend": 0, "backend": 0}, "evaluations": {"midend": 0, "backend": 0},
            "status": {"midend": "skipped", "backend": "skipped"}, "error": reason,
            "final_costs": {}, "wall_time_ms": wall_time_ms, "stage_ms": {}}


def report_json(report: dict[str, Any], include_timing: bool = True) -> str:
    """Canonical JSON text (sorted keys); timing fields can be dropped for
    comparisons."""
    r = dict(report) if include_timing else {k: v for k, v in report.items() if k not in TIMING_KEYS}
    return json.dumps(r, sort_keys=True, indent=2, allow_nan=False)
