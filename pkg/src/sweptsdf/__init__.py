"""Swept-volume signed distance fields for moving 2D shapes, and an SE(2)
planner that keeps the swept volume clear of obstacles."""

from .errors import (ConsistencyError, ConstructionError, DomainError, InvalidGoalError, InvalidStartError,
                     NonConvergenceError, NoPathError, PlanningError, SceneParseError, ShapeValidationError)
from .geometry import Motion, Pose2, Shape, l_shape, pose_at, rot, shape_sdf, shape_sdf_gradient
from .sweep import MetricResult, SweepProblem, body_speed_bound, metric_g, metric_g_batch
from .svsdf import (GridSpec, GsipConfig, SvsdfField, SvsdfResult, brute_force_svsdf, svsdf_grid, svsdf_points,
                    svsdf_query)
from .traj import Boundary, PolyTrajectory, WaypointParams, control_effort, minco_construct, propagate_gradient
from .optimizer import LbfgsConfig, LbfgsResult, lbfgs_minimize, smoothed_l1

__version__ = "0.1.0"

__all__ = [
    "ConsistencyError", "ConstructionError", "DomainError", "InvalidGoalError", "InvalidStartError",
    "NonConvergenceError", "NoPathError", "PlanningError", "SceneParseError", "ShapeValidationError",
    "Motion", "Pose2", "Shape", "l_shape", "pose_at", "rot", "shape_sdf", "shape_sdf_gradient",
    "MetricResult", "SweepProblem", "body_speed_bound", "metric_g", "metric_g_batch",
    "GridSpec", "GsipConfig", "SvsdfField", "SvsdfResult", "brute_force_svsdf", "svsdf_grid", "svsdf_points",
    "svsdf_query", "Boundary", "PolyTrajectory", "WaypointParams", "control_effort", "minco_construct",
    "propagate_gradient", "LbfgsConfig", "LbfgsResult", "lbfgs_minimize", "smoothed_l1",
]
