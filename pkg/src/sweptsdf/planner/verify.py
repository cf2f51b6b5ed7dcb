"""Independent collision check by dense time sampling.

Shares nothing with the GSIP path or the branch-and-bound metric: every
obstacle point is tested against the body at ``time_samples`` uniform
instants, and the minimum body-frame distance is the clearance.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from .. import _kernels as K
from ..geometry import Motion, Shape
from ..traj import PolyTrajectory
from .scene import Scene

MIN_TIME_SAMPLES = 10000


def dense_clearance(traj: PolyTrajectory | Motion, shape: Shape, points: ArrayLike,
                    time_samples: int = MIN_TIME_SAMPLES):
    """Rows (min_t sdf, argmin t) per point over uniform time samples."""
    motion = traj if isinstance(traj, Motion) else Motion.from_trajectory(traj)
    pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))
    return K.dense_min(*shape.arrays, shape.bounding_radius, motion.coeffs, motion.breaks,
                       motion.t_start, motion.t_end, int(time_samples), pts)


def cca_verify(trajectory: PolyTrajectory | Motion, scene: Scene, shape: Shape,
               time_samples: int = MIN_TIME_SAMPLES, points: Optional[ArrayLike] = None):
    """(pass, min_clearance) over every occupied-cell centre; an obstacle-free
    scene gives (True, inf).

    Raises:
        ValueError: fewer than 1e4 time samples.
    """
    if time_samples < MIN_TIME_SAMPLES:
        raise ValueError(f"time_samples must be >= {MIN_TIME_SAMPLES}")
    pts = scene.obstacle_points if points is None else np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return True, math.inf
    clearance = float(dense_clearance(trajectory, shape, pts, time_samples)[:, 0].min())
    return clearance > 0.0, clearance
