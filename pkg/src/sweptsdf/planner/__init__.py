"""Three-stage SE(2) planner: grid A*, trajectory fit, swept-volume refinement."""

from .scene import MapSpec, PlannerConfig, Scene, random_scene
from .frontend import AStarNode, AStarResult, ChannelMaps, PoseChannelMasks, astar_search, build_masks, collide
from .midend import MidendResult, midend_fit
from .backend import BackendReport, BackendResult, backend_optimize
from .verify import cca_verify
from .pipeline import PlanResult, failure_report, plan, report_json

__all__ = [
    "MapSpec", "PlannerConfig", "Scene", "random_scene",
    "AStarNode", "AStarResult", "ChannelMaps", "PoseChannelMasks", "astar_search", "build_masks", "collide",
    "MidendResult", "midend_fit", "BackendReport", "BackendResult", "backend_optimize",
    "cca_verify", "PlanResult", "failure_report", "plan", "report_json",
]
