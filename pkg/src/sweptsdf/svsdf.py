"""Swept-volume signed distance by shrinking tangent balls.

Outside the swept volume the conservative metric g is already exact. For an
interior point p the depth is the radius of the largest open ball around p
that stays inside the volume. Starting from a radius known to be too large,
each iteration finds the point of the ball where g is largest (dense polar
samples, the best few polished by projected gradient ascent) and shrinks the
radius by that amount. Once no point of the ball is more than epsilon outside,
the ball is tangent to the boundary and -r is returned.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage

from . import _kernels as K
from .errors import ConsistencyError, NonConvergenceError
from .sweep import SweepProblem

DEFAULT_SAFETY_THRESHOLD = 0.366


@dataclass(frozen=True)
class GsipConfig:
    """Solver settings. ``initial_radius=None`` picks
    2 * bounding_radius + a bound on the distance travelled by the body."""

    epsilon: float = DEFAULT_SAFETY_THRESHOLD / 2
    initial_radius: Optional[float] = None
    samples_angular: int = 32
    samples_radial: int = 4
    refine_steps: int = 8
    max_iterations: int = 64
    refine_top: int = 4  # samples per iteration that get the ascent polish

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.initial_radius is not None and not self.initial_radius > 0:
            raise ValueError("initial_radius must be positive")
        if self.samples_angular < 8:
            raise ValueError("samples_angular must be >= 8")
        if self.samples_radial < 2:
            raise ValueError("samples_radial must be >= 2")
        if self.refine_steps < 0 or self.max_iterations < 1 or self.refine_top < 1:
            raise ValueError("refine_steps >= 0, max_iterations >= 1 and refine_top >= 1 required")

    def radius_for(self, problem: SweepProblem) -> float:
        if self.initial_radius is not None:
            return float(self.initial_radius)
        return default_initial_radius(problem)

    def solver_args(self) -> tuple:
        return (self.epsilon, self.samples_angular, self.samples_radial, self.refine_steps,
                self.refine_top, self.max_iterations)


def default_initial_radius(problem: SweepProblem) -> float:
    """2R plus how far any body point can travel: path length + R * total turn."""
    m = problem.motion
    ts = np.linspace(m.t_start, m.t_end, 1025)
    poses = m.poses(ts)
    travel = float(np.sum(np.linalg.norm(np.diff(poses[:, :2], axis=0), axis=1)))
    turn = float(np.sum(np.abs(np.diff(poses[:, 2]))))
    r = problem.shape.bounding_radius
    return 2.0 * r + travel + r * turn + 1e-6


@dataclass(frozen=True)
class SvsdfResult:
    value: float
    t_star: float
    tangent_point: NDArray[np.float64]
    gradient: NDArray[np.float64]
    iterations: int
    status: str = "exterior"  # exterior | interior | boundary
    radii: tuple[float, ...] = ()
    violations: tuple[float, ...] = ()
    gradient_defined: bool = True
    # tightest certified signed value, used to seed neighbouring queries
    seed_value: float = 0.0
    # lower-level maximizer of every iteration: violations[k] = g(lp_points[k])
    lp_points: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, 2)))


_STATUS_NAMES = {K.STATUS_EXTERIOR: "exterior", K.STATUS_INTERIOR: "interior",
                 K.STATUS_BOUNDARY: "boundary"}


def svsdf_query(problem: SweepProblem, p: ArrayLike, config: Optional[GsipConfig] = None,
                initial_radius: Optional[float] = None) -> SvsdfResult:
    """Signed distance from p to the swept volume.

    Raises:
        NonConvergenceError: max_iterations reached; carries the last radius
            and the last lower-level maximum.
        ConsistencyError: the radius went negative.
    """
    config = config or GsipConfig()
    p = np.asarray(p, dtype=float)
    if p.shape != (2,) or not np.all(np.isfinite(p)):
        raise ValueError("p must be a finite 2-vector")
    r0 = float(initial_radius) if initial_radius is not None else config.radius_for(problem)
    if not r0 > 0:
        raise ValueError("initial radius must be positive")
    hist_r = np.zeros(config.max_iterations)
    hist_g = np.zeros(config.max_iterations)
    hist_q = np.zeros((config.max_iterations, 2))
    st, v, ts, qx, qy, gx, gy, it, seed = K.gsip(*problem.kernel_args(), p[0], p[1], r0,
                                                 *config.solver_args(), np.zeros((0, 2)), hist_r, hist_g, hist_q)
    it = int(it)
    radii = tuple(float(x) for x in hist_r[:it])
    viol = tuple(float(x) for x in hist_g[:it])
    lp_points = hist_q[:it].copy()
    if st == K.STATUS_NONCONVERGED:
        raise NonConvergenceError(f"no tangent ball after {it} iterations at p={p.tolist()}",
                                  radius=-float(v), violation=viol[-1] if viol else float("nan"))
    if st == K.STATUS_NEGATIVE_RADIUS:
        raise ConsistencyError(f"radius became negative at p={p.tolist()} (r history {radii})")
    tp = np.array([qx, qy])
    defined = not (st == K.STATUS_INTERIOR and qx == p[0] and qy == p[1])
    return SvsdfResult(float(v), float(ts), tp, np.array([gx, gy]), it, _STATUS_NAMES[int(st)],
                       radii, viol, defined, float(seed), lp_points)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Cell-centred grid: centre (ix, iy) = origin + (ix + 0.5, iy + 0.5) * cell_size."""

    origin: tuple[float, float]
    cell_size: float
    nx: int
    ny: int

    def __post_init__(self) -> None:
        if not (self.cell_size > 0 and self.nx > 0 and self.ny > 0):
            raise ValueError("grid needs positive cell size and extents")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    def centers(self) -> NDArray[np.float64]:
        """(ny, nx, 2) cell centres."""
        xs = self.origin[0] + (np.arange(self.nx) + 0.5) * self.cell_size
        ys = self.origin[1] + (np.arange(self.ny) + 0.5) * self.cell_size
        X, Y = np.meshgrid(xs, ys)
        return np.stack([X, Y], axis=-1)

    @property
    def diagonal(self) -> float:
        return self.cell_size * math.sqrt(2.0)

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "cell_size": self.cell_size, "nx": self.nx, "ny": self.ny}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(tuple(d["origin"]), float(d["cell_size"]), int(d["nx"]), int(d["ny"]))


@dataclass
class SvsdfField:
    """Per-cell results of :func:`svsdf_grid`; arrays are indexed [iy, ix]."""

    grid: GridSpec
    values: NDArray[np.float64]
    t_star: NDArray[np.float64]
    tangent_points: NDArray[np.float64]
    gradients: NDArray[np.float64]
    iterations: NDArray[np.int64]
    status: NDArray[np.int64]
    wall_time: float = 0.0
    seed_values: NDArray[np.float64] = field(default=None, repr=False)

    @property
    def failed(self) -> NDArray[np.bool_]:
        return self.status < 0

    @property
    def n_failed(self) -> int:
        return int(self.failed.sum())

    def result(self, ix: int, iy: int) -> SvsdfResult:
        st = int(self.status[iy, ix])
        if st < 0:
            raise NonConvergenceError(f"cell ({ix}, {iy}) failed", radius=-float(self.values[iy, ix]),
                                      violation=float("nan"))
        return SvsdfResult(float(self.values[iy, ix]), float(self.t_star[iy, ix]),
                           self.tangent_points[iy, ix].copy(), self.gradients[iy, ix].copy(),
                           int(self.iterations[iy, ix]), _STATUS_NAMES[st])


def svsdf_grid(problem: SweepProblem, config: Optional[GsipConfig] = None,
               grid: Optional[GridSpec] = None, warm_start: bool = True,
               workers: int = 1) -> SvsdfField:
    """Evaluate the swept-volume SDF at every cell centre.

    Rows are swept in row-major order. With ``warm_start`` every query starts
    from the radius certified by its finished neighbours (left and the three
    cells above) instead of the large default. ``workers > 1`` splits the rows
    into contiguous blocks run on threads; each block cold-starts its first
    cell. Failed cells carry a negative status and do not stop the sweep.
    """
    import time

    config = config or GsipConfig()
    if grid is None:
        raise ValueError("grid spec required")
    out = np.zeros((grid.ny, grid.nx, 9))
    r_def = config.radius_for(problem)
    args = problem.kernel_args()
    workers = max(1, min(int(workers), grid.ny))

    def run(r0: int, r1: int) -> None:
        K.gsip_grid(*args, grid.origin[0], grid.origin[1], grid.cell_size, grid.nx, r0, r1,
                    bool(warm_start), r_def, *config.solver_args(), out)

    t0 = time.perf_counter()
    if workers == 1:
        run(0, grid.ny)
    else:
        bounds = np.linspace(0, grid.ny, workers + 1).astype(int)
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(lambda k: run(bounds[k], bounds[k + 1]), range(workers)))
    dt = time.perf_counter() - t0
    return SvsdfField(grid, out[..., 0].copy(), out[..., 1].copy(), out[..., 2:4].copy(),
                      out[..., 4:6].copy(), out[..., 6].astype(np.int64), out[..., 7].astype(np.int64),
                      dt, out[..., 8].copy())


def svsdf_points(problem: SweepProblem, points: ArrayLike, config: Optional[GsipConfig] = None,
                 initial_radii: Optional[ArrayLike] = None,
                 skip_above: float = math.inf) -> NDArray[np.float64]:
    """Batch queries; rows of (value, t_star, qx, qy, grad_x, grad_y, iterations, status, seed).

    Points whose bounding-circle lower bound exceeds ``skip_above`` are not
    solved and get status 3 with that bound as value.
    """
    config = config or GsipConfig()
    pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))
    if initial_radii is None:
        r = np.full(len(pts), config.radius_for(problem))
    else:
        r = np.ascontiguousarray(np.broadcast_to(np.asarray(initial_radii, dtype=float), (len(pts),)))
    return K.gsip_batch(*problem.kernel_args(), pts, r, float(skip_above), *config.solver_args())


# ---------------------------------------------------------------------------
# brute-force reference
# ---------------------------------------------------------------------------


def rasterize_sweep(problem: SweepProblem, grid: GridSpec, time_samples: int = 10000) -> NDArray[np.bool_]:
    """Occupancy [iy, ix]: cell centre inside the shape at some sampled time."""
    occ = np.zeros((grid.ny, grid.nx), dtype=np.bool_)
    m = problem.motion
    K.rasterize_sweep(*problem.shape.arrays, problem.shape.bounding_radius, m.coeffs, m.breaks,
                      m.t_start, m.t_end, int(time_samples), grid.origin[0], grid.origin[1],
                      grid.cell_size, occ)
    return occ


def occupancy_sdf(occ: NDArray[np.bool_], cell_size: float) -> NDArray[np.float64]:
    """Signed distance of a boolean occupancy grid; the boundary is placed
    half a cell beyond the last occupied centre."""
    occ = np.asarray(occ, dtype=bool)
    if not occ.any():
        return np.full(occ.shape, np.inf)
    if occ.all():
        return np.full(occ.shape, -np.inf)
    d_out = ndimage.distance_transform_edt(~occ, sampling=cell_size)
    d_in = ndimage.distance_transform_edt(occ, sampling=cell_size)
    half = 0.5 * cell_size
    return np.where(occ, -(d_in - half), d_out - half)


def brute_force_svsdf(problem: SweepProblem, grid: GridSpec, time_samples: int = 10000) -> NDArray[np.float64]:
    """Reference field: rasterize the sweep at ``time_samples`` instants and
    take the exact Euclidean distance transform of the occupancy.

    Accurate to about one cell diagonal plus the distance the body moves
    between samples.
    """
    if time_samples < 1000:
        raise ValueError("time_samples must be >= 1000")
    return occupancy_sdf(rasterize_sweep(problem, grid, time_samples), grid.cell_size)


def boundary_band(occ: NDArray[np.bool_], cells: float = 1.5) -> NDArray[np.bool_]:
    """Cells whose centre lies within ``cells`` cell widths of an occupancy
    change, measured centre to centre."""
    occ = np.asarray(occ, dtype=bool)
    if occ.all() or not occ.any():
        return np.zeros(occ.shape, dtype=bool)
    d_out = ndimage.distance_transform_edt(~occ)
    d_in = ndimage.distance_transform_edt(occ)
    d = np.where(occ, d_in, d_out)
    return d <= cells + 1e-9


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def save_field(path: str | os.PathLike, values: ArrayLike, grid: GridSpec) -> None:
    """Raw little-endian float32 rows (iy ascending) plus ``<path>.json`` header."""
    import json

    v = np.asarray(values, dtype="<f4")
    if v.shape != (grid.ny, grid.nx):
        raise ValueError("field shape does not match grid")
    with open(path, "wb") as f:
        f.write(v.tobytes())
    with open(os.fspath(path) + ".json", "w") as f:
        json.dump({**grid.to_dict(), "dtype": "float32", "order": "row-major, iy ascending"}, f, indent=1)


def load_field(path: str | os.PathLike) -> tuple[NDArray[np.float32], GridSpec]:
    import json

    with open(os.fspath(path) + ".json") as f:
        grid = GridSpec.from_dict(json.load(f))
    v = np.fromfile(path, dtype="<f4")
    if v.size != grid.nx * grid.ny:
        raise ValueError("field size does not match header")
    return v.reshape(grid.ny, grid.nx), grid


def field_to_pgm(path: str | os.PathLike, values: ArrayLike) -> None:
    """Normalized 8-bit greyscale; image row 0 is the top (largest y)."""
    from .io import write_pgm

    v = np.asarray(values, dtype=float)
    finite = np.isfinite(v)
    if finite.any():
        lo, hi = float(v[finite].min()), float(v[finite].max())
    else:
        lo, hi = 0.0, 1.0
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    img = np.clip(np.where(finite, (v - lo) * scale, np.where(v > 0, 255, 0)), 0, 255)
    write_pgm(path, np.flipud(img.astype(np.uint8)))
