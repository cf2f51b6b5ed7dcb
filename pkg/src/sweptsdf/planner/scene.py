"""Occupancy scenes, planner settings and the random map generator."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage


@dataclass(frozen=True, eq=False)
class Scene:
    """Boolean occupancy ``[iy, ix]`` with row 0 at the bottom (smallest y).

    Cell (ix, iy) covers origin + [ix, ix + 1) x [iy, iy + 1) times cell_size;
    its centre represents the obstacle sample for that cell. Poses are
    (x, y, yaw).
    """

    occupancy: NDArray[np.bool_]
    origin: tuple[float, float] = (0.0, 0.0)
    cell_size: float = 0.1
    start: tuple[float, float, float] = (0.0, 0.0, 0.0)
    goal: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        occ = np.array(self.occupancy, dtype=bool)
        if occ.ndim != 2 or occ.size == 0:
            raise ValueError("occupancy must be a non-empty 2D grid")
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        object.__setattr__(self, "goal", tuple(float(v) for v in self.goal))

    @property
    def shape(self) -> tuple[int, int]:
        return self.occupancy.shape

    @property
    def nx(self) -> int:
        return self.occupancy.shape[1]

    @property
    def ny(self) -> int:
        return self.occupancy.shape[0]

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax)."""
        x0, y0 = self.origin
        return x0, x0 + self.nx * self.cell_size, y0, y0 + self.ny * self.cell_size

    def center_of(self, ix, iy) -> NDArray[np.float64]:
        return np.stack([self.origin[0] + (np.asarray(ix) + 0.5) * self.cell_size,
                         self.origin[1] + (np.asarray(iy) + 0.5) * self.cell_size], axis=-1)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor((x - self.origin[0]) / self.cell_size)),
                int(math.floor((y - self.origin[1]) / self.cell_size)))

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.nx and 0 <= iy < self.ny

    @cached_property
    def obstacle_points(self) -> NDArray[np.float64]:
        """Centres of all occupied cells, (n, 2), in row-major cell order."""
        iy, ix = np.nonzero(self.occupancy)
        return np.ascontiguousarray(self.center_of(ix, iy).reshape(-1, 2))

    @cached_property
    def boundary_points(self) -> NDArray[np.float64]:
        """Centres of occupied cells with a free 4-neighbour (map edges count
        as occupied)."""
        occ = self.occupancy
        interior = ndimage.binary_erosion(occ, border_value=1)
        iy, ix = np.nonzero(occ & ~interior)
        return np.ascontiguousarray(self.center_of(ix, iy).reshape(-1, 2))

    def with_poses(self, start, goal) -> "Scene":
        return Scene(self.occupancy, self.origin, self.cell_size, tuple(start), tuple(goal))

    def to_dict(self) -> dict[str, Any]:
        return {"origin": list(self.origin), "cell_size": self.cell_size,
                "nx": self.nx, "ny": self.ny, "start": list(self.start), "goal": list(self.goal),
                "occupancy": self.occupancy.astype(np.uint8).tolist()}

    def same_as(self, other: "Scene") -> bool:
        return (np.array_equal(self.occupancy, other.occupancy) and self.origin == other.origin
                and self.cell_size == other.cell_size and self.start == other.start
                and self.goal == other.goal)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlannerConfig:
    """Weights and limits of the three planning stages.

    The first block are the published defaults; the rest are plumbing.
    """

    lambda_m: float = 1.0
    lambda_t: float = 20.0
    lambda_p: float = 1000.0
    lambda_R: float = 32000.0
    lambda_o: float = 4000.0
    lambda_v: float = 1000.0
    lambda_a: float = 1000.0
    lambda_j: float = 1000.0
    v_m: float = 10.0
    a_m: float = 5.0
    j_m: float = 10.0
    s_thr: float = 0.366
    kappa: int = 32
    mu: float = 0.01

    yaw_channels: int = 36
    max_yaw_step: int = 3  # channels the front-end may turn per grid step
    frontend_inflation: float = 0.4  # obstacle growth for the search; halved, then dropped, on failure
    segment_length: float = 1.0  # metres of A* path per trajectory segment
    midend_max_evals: int = 300
    backend_max_evals: int = 300
    backend_rounds: int = 3  # restarts (re-culled points, fresh curvature memory) while collisions remain
    backend_max_step: float = 0.5  # largest change of any waypoint coordinate or tau per trial step
    epsilon: Optional[float] = None  # GSIP tolerance; None -> s_thr / 2
    cull_margin: float = 1.0
    verify_samples: int = 10000

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name.startswith("lambda_") and not v >= 0:
                raise ValueError(f"{f.name} must be >= 0")
        if self.kappa < 4:
            raise ValueError("kappa must be >= 4")
        if not (self.v_m > 0 and self.a_m > 0 and self.j_m > 0 and self.s_thr > 0 and self.mu > 0):
            raise ValueError("limits, s_thr and mu must be positive")
        if self.yaw_channels < 4 or self.max_yaw_step < 1:
            raise ValueError("need >= 4 yaw channels and max_yaw_step >= 1")
        if self.frontend_inflation < 0:
            raise ValueError("frontend_inflation must be >= 0")
        if not self.backend_max_step > 0 or self.backend_rounds < 1:
            raise ValueError("backend_max_step must be positive and backend_rounds >= 1")
        if self.verify_samples < 10000:
            raise ValueError("verify_samples must be >= 1e4")

    @property
    def gsip_epsilon(self) -> float:
        return self.epsilon if self.epsilon is not None else 0.5 * self.s_thr

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def with_overrides(self, overrides: dict[str, Any]) -> "PlannerConfig":
        known = {f.name: f for f in fields(self)}
        kw = {}
        for k, v in overrides.items():
            if k not in known:
                raise KeyError(f"unknown planner setting {k!r}")
            kw[k] = _coerce(v, type(getattr(self, k)) if getattr(self, k) is not None else float)
        return replace(self, **kw)


def _coerce(v, typ):
    if isinstance(v, str):
        if typ is bool:
            return v.lower() in ("1", "true", "yes", "on")
        if typ is int:
            return int(v)
        return float(v)
    return typ(v)


# ---------------------------------------------------------------------------
# random maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MapSpec:
    """Random disc maps: radii U[r_min, r_max], edge-to-edge gap >= min_gap.

    ``density`` in [0, 1] scales the dart-throwing budget; 1 saturates the
    map. Start and goal sit in opposite bands along x and are kept at least
    ``pose_clearance`` from every disc.
    """

    size: float = 12.0
    cell_size: float = 0.1
    r_min: float = 0.3
    r_max: float = 1.0
    min_gap: float = 1.2
    density: float = 1.0
    attempts: int = 3000
    pose_clearance: float = 1.2
    band: float = 1.5  # width of the start and goal bands


def random_discs(rng: np.random.Generator, spec: MapSpec, keep_clear: list[tuple[float, float]]):
    """Poisson-disk style dart throwing; returns rows (cx, cy, r)."""
    discs: list[tuple[float, float, float]] = []
    budget = int(round(spec.density * spec.attempts))
    for _ in range(budget):
        r = rng.uniform(spec.r_min, spec.r_max)
        cx, cy = rng.uniform(0.0, spec.size, 2)
        if any(math.hypot(cx - x, cy - y) < r + spec.pose_clearance for x, y in keep_clear):
            continue
        if any(math.hypot(cx - x, cy - y) < r + rr + spec.min_gap for x, y, rr in discs):
            continue
        discs.append((float(cx), float(cy), float(r)))
    return np.array(discs, dtype=float).reshape(-1, 3)


def rasterize_discs(discs: NDArray[np.float64], n: int, cell: float) -> NDArray[np.bool_]:
    """Cells whose centre lies inside any disc."""
    c = (np.arange(n) + 0.5) * cell
    X, Y = np.meshgrid(c, c)
    occ = np.zeros((n, n), dtype=bool)
    for cx, cy, r in discs:
        occ |= (X - cx) ** 2 + (Y - cy) ** 2 <= r * r
    return occ


def random_scene(seed: int, spec: Optional[MapSpec] = None) -> Scene:
    """Seeded random disc map with a start on the left and a goal on the right."""
    spec = spec or MapSpec()
    rng = np.random.default_rng(seed)
    lo, hi = spec.pose_clearance, spec.size - spec.pose_clearance
    sx = rng.uniform(0.5, spec.band) + 0.5
    gx = spec.size - rng.uniform(0.5, spec.band) - 0.5
    sy, gy = rng.uniform(lo, hi, 2)
    syaw, gyaw = rng.uniform(-math.pi, math.pi, 2)
    discs = random_discs(rng, spec, [(sx, sy), (gx, gy)])
    n = int(round(spec.size / spec.cell_size))
    occ = rasterize_discs(discs, n, spec.cell_size)
    return Scene(occ, (0.0, 0.0), spec.cell_size, (sx, sy, syaw), (gx, gy, gyaw))
