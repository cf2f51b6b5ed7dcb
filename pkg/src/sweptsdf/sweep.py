"""Conservative swept-volume metric g(p) = min_t sdf(T(t)^-1 p).

g is exact outside the swept volume and an upper bound of the swept-volume
SDF inside it. Its minimizing time is found globally: bounding-circle band
pruning on a coarse time grid, then Lipschitz branch-and-bound with a 1D
local search per leaf interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import _kernels as K
from .errors import DomainError
from .geometry import Motion, Shape

LIPSCHITZ_SAFETY = 1.05  # pads sampled rate maxima inside the pruning bounds


@dataclass(frozen=True, eq=False)
class SweepProblem:
    """A shape following a motion, plus the time-search resolution.

    time_resolution defaults to 1/64 of the motion duration;
    descent_tolerance is the bracket width at which 1D refinement stops.
    """

    shape: Shape
    motion: Motion
    time_resolution: Optional[float] = None
    descent_tolerance: float = 1e-8
    # derived, filled in __post_init__
    coarse_t: NDArray[np.float64] = field(init=False, repr=False)
    coarse_xy: NDArray[np.float64] = field(init=False, repr=False)
    vmax: float = field(init=False, repr=False)
    wmax: float = field(init=False, repr=False)
    rdot: float = field(init=False, repr=False)
    _args: tuple = field(init=False, repr=False)

    def __post_init__(self) -> None:
        span = self.motion.t_end - self.motion.t_start
        if span < 0:
            raise DomainError("empty time domain")
        res = self.time_resolution if self.time_resolution is not None else (span / 64 if span > 0 else 1.0)
        if not res > 0 or not self.descent_tolerance > 0:
            raise ValueError("time_resolution and descent_tolerance must be positive")
        object.__setattr__(self, "time_resolution", float(res))
        n = max(1, int(math.ceil(span / res - 1e-9))) if span > 0 else 1
        ct = np.linspace(self.motion.t_start, self.motion.t_end, n + 1)
        poses = self.motion.poses(ct)
        v, w = self.motion.rate_bounds()
        object.__setattr__(self, "coarse_t", ct)
        object.__setattr__(self, "coarse_xy", np.ascontiguousarray(poses[:, :2]))
        object.__setattr__(self, "vmax", float(v))
        object.__setattr__(self, "wmax", float(w))
        object.__setattr__(self, "rdot", self.shape.radius_rate / span if span > 0 else 0.0)
        object.__setattr__(self, "_args", (
            *self.shape.arrays, self.shape.bounding_radius, self.motion.coeffs, self.motion.breaks,
            ct, np.ascontiguousarray(poses[:, 0]), np.ascontiguousarray(poses[:, 1]),
            LIPSCHITZ_SAFETY * self.vmax, LIPSCHITZ_SAFETY * self.wmax, LIPSCHITZ_SAFETY * self.rdot,
            self.descent_tolerance))

    @property
    def span(self) -> float:
        return self.motion.t_end - self.motion.t_start

    def kernel_args(self) -> tuple:
        """Positional arguments shared by every metric kernel call."""
        return self._args

    def with_motion(self, motion: Motion) -> "SweepProblem":
        return SweepProblem(self.shape, motion, None, self.descent_tolerance)

    def shape_time(self, t: float) -> float:
        return (t - self.motion.t_start) / self.span if self.span > 0 else 0.0


@dataclass(frozen=True)
class MetricResult:
    g_value: float
    t_star: float
    local_point: NDArray[np.float64]
    gradient_wrt_p: NDArray[np.float64]


def metric_g(problem: SweepProblem, p: ArrayLike, prune: bool = True) -> MetricResult:
    """Evaluate g at a world point with its argmin time and envelope gradient.

    ``prune=False`` disables both the bounding-circle band and the
    branch-and-bound cut; every coarse interval is then locally searched.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (2,) or not np.all(np.isfinite(p)):
        raise ValueError("p must be a finite 2-vector")
    g, ts, lx, ly, gx, gy = K.metric(*problem.kernel_args(), prune, p[0], p[1], -np.inf)
    return MetricResult(float(g), float(ts), np.array([lx, ly]), np.array([gx, gy]))


def metric_g_batch(problem: SweepProblem, points: ArrayLike, prune: bool = True) -> NDArray[np.float64]:
    """Rows of (g, t_star, local_x, local_y, grad_x, grad_y) for (N, 2) points."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))
    return K.metric_batch(*problem.kernel_args(), prune, pts)


def body_speed_bound(problem: SweepProblem, p: Optional[ArrayLike] = None) -> float:
    """Lipschitz constant in t of d(t) = sdf(T(t)^-1 p).

    |d'(t)| <= |v(t)| + |yaw_rate(t)| * |p - c(t)| + |d sdf/dt|. With ``p``
    given the reach |p - c(t)| is bounded over the whole motion. Without it
    the reach is the bounding radius, so the bound holds while p stays inside
    the body's bounding circle (the only times that matter for g <= 0).
    """
    if p is None:
        reach = problem.shape.bounding_radius
    else:
        p = np.asarray(p, dtype=float)
        dist = np.linalg.norm(problem.coarse_xy - p, axis=1)
        reach = float(dist.max()) + 0.5 * problem.vmax * problem.time_resolution
    return float(problem.vmax + problem.wmax * reach + problem.rdot)
