"""SVG overlays of scenes and trajectories, for viewing only."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage

from . import _kernels as K
from .geometry import Motion, Shape, rot
from .planner.scene import Scene
from .svsdf import GridSpec, rasterize_sweep
from .sweep import SweepProblem
from .traj import PolyTrajectory


def _fmt(v: float) -> str:
    return f"{v:.4f}".rstrip("0").rstrip(".")


def _cell_runs(mask: NDArray[np.bool_]):
    """Horizontal runs (ix0, iy, length) of set cells."""
    for iy in range(mask.shape[0]):
        row = np.concatenate([[False], mask[iy], [False]])
        d = np.diff(row.astype(np.int8))
        for a, b in zip(np.nonzero(d == 1)[0], np.nonzero(d == -1)[0]):
            yield int(a), iy, int(b - a)


def _cells_svg(mask: NDArray[np.bool_], origin, cell: float, style: str) -> str:
    rects = [f'<rect x="{_fmt(origin[0] + a * cell)}" y="{_fmt(origin[1] + iy * cell)}" '
             f'width="{_fmt(n * cell)}" height="{_fmt(cell)}"/>' for a, iy, n in _cell_runs(mask)]
    return f'<g {style}>' + "".join(rects) + "</g>" if rects else ""


def _polyline(xy: ArrayLike, style: str) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in np.asarray(xy)[:, :2])
    return f'<polyline points="{pts}" fill="none" {style}/>'


def footprint_svg(shape: Shape, pose: Sequence[float], style: str) -> str:
    """Outline of every primitive of ``shape`` placed at pose (x, y, yaw)."""
    kinds, params, verts, offsets = shape.arrays
    R = rot(pose[2])
    t = np.asarray(pose[:2], dtype=float)
    out = []
    for k in range(len(kinds)):
        if kinds[k] == K.KIND_DISK:
            c = R @ params[k, :2] + t
            out.append(f'<circle cx="{_fmt(c[0])}" cy="{_fmt(c[1])}" r="{_fmt(params[k, 2])}" {style}/>')
        else:
            v = verts[offsets[k]:offsets[k + 1]] @ R.T + t
            pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in v)
            out.append(f'<polygon points="{pts}" {style}/>')
    return "".join(out)


def sweep_outline(shape: Shape, traj: PolyTrajectory | Motion, grid: GridSpec,
                  time_samples: int = 10000) -> NDArray[np.bool_]:
    """Boundary cells of the brute-force swept-volume raster on ``grid``."""
    motion = traj if isinstance(traj, Motion) else Motion.from_trajectory(traj)
    occ = rasterize_sweep(SweepProblem(shape, motion), grid, time_samples)
    return occ & ~ndimage.binary_erosion(occ, border_value=0)


def overlay_svg(scene: Scene, shape: Optional[Shape] = None, nodes: Optional[ArrayLike] = None,
                initial: Optional[PolyTrajectory] = None, final: Optional[PolyTrajectory] = None,
                sweep_samples: int = 10000, px_per_m: float = 50.0) -> str:
    """Map cells (black), A* nodes (blue dots), initial trajectory (grey),
    final trajectory (red), swept-volume outline of the final trajectory
    (orange) and the footprint at start and goal (green)."""
    x0, x1, y0, y1 = scene.extent
    w, h = x1 - x0, y1 - y0
    cell = scene.cell_size
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(w * px_per_m)}" '
             f'height="{_fmt(h * px_per_m)}" viewBox="{_fmt(x0)} {_fmt(-y1)} {_fmt(w)} {_fmt(h)}">',
             '<g transform="scale(1,-1)">',
             f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(w)}" height="{_fmt(h)}" fill="white"/>',
             _cells_svg(scene.occupancy, scene.origin, cell, 'fill="black"')]
    if shape is not None and final is not None:
        grid = GridSpec(scene.origin, cell, scene.nx, scene.ny)
        parts.append(_cells_svg(sweep_outline(shape, final, grid, sweep_samples), scene.origin, cell,
                                'fill="orange" fill-opacity="0.8"'))
    lw = _fmt(max(0.02, cell * 0.3))
    for traj, color in ((initial, "grey"), (final, "red")):
        if traj is not None:
            ts = np.linspace(0.0, traj.total_time, 40 * traj.segments + 1)
            parts.append(_polyline(traj.sample(ts), f'stroke="{color}" stroke-width="{lw}"'))
    if nodes is not None:
        r = _fmt(cell * 0.3)
        parts.append('<g fill="blue">' + "".join(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}"/>' for x, y, *_ in np.asarray(nodes)) + "</g>")
    if shape is not None:
        style = f'fill="none" stroke="green" stroke-width="{lw}"'
        parts.append(footprint_svg(shape, scene.start, style) + footprint_svg(shape, scene.goal, style))
    parts.append("</g></svg>\n")
    return "\n".join(p for p in parts if p)
