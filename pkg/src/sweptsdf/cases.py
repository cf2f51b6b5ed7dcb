"""Named reference cases shared by the CLI, the tests and the benchmarks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .geometry import Motion, Shape, l_shape
from .svsdf import GridSpec
from .sweep import SweepProblem


@dataclass(frozen=True, eq=False)
class FieldCase:
    name: str
    problem: SweepProblem
    grid: GridSpec
    # closed-form swept-volume SDF, when one exists
    exact: Optional[Callable[[NDArray[np.float64]], NDArray[np.float64]]] = None


def segment_distance(p: ArrayLike, a: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
    """Distance from points (..., 2) to the segment ab."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    ab = np.asarray(b, dtype=float) - a
    s = np.clip(np.einsum("...i,i->...", p - a, ab) / float(ab @ ab), 0.0, 1.0)
    return np.linalg.norm(p - a - s[..., None] * ab, axis=-1)


def capsule_case() -> FieldCase:
    """Unit disk translating 4 m along x: the sweep is a capsule."""
    a, b = (0.0, 0.0), (4.0, 0.0)
    problem = SweepProblem(Shape.disk(1.0), Motion.linear((*a, 0.0), (*b, 0.0)))
    grid = GridSpec((-2.0, -4.0), 0.08, 100, 100)
    return FieldCase("capsule", problem, grid, lambda p: segment_distance(p, a, b) - 1.0)


def rotating_l_case() -> FieldCase:
    """L (arm 2, thickness 1) translating 4 m while turning a quarter turn."""
    problem = SweepProblem(l_shape(2.0, 1.0), Motion.linear((0.0, 0.0, 0.0), (4.0, 0.0, math.pi / 2)))
    grid = GridSpec((-2.5, -3.5), 0.08, 100, 100)
    return FieldCase("rotating-l", problem, grid)


def static_disk_case() -> FieldCase:
    """Disk of radius 1 that does not move: the field is the disk SDF."""
    problem = SweepProblem(Shape.disk(1.0), Motion.constant((0.0, 0.0, 0.0)))
    grid = GridSpec((-2.0, -2.0), 0.08, 50, 50)
    return FieldCase("static-disk", problem, grid, lambda p: np.linalg.norm(p, axis=-1) - 1.0)


FIELD_CASES = {"capsule": capsule_case, "rotating-l": rotating_l_case, "static-disk": static_disk_case}


def planner_robot() -> Shape:
    """The L-shaped robot used on the random maps (arm 1 m, thickness 0.4 m)."""
    return l_shape(1.0, 0.4)
