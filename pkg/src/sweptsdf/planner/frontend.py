"""Grid A* over (x, y, yaw channel) with per-yaw footprint stamps.

Position moves are 8-connected. The yaw is not a search dimension of its
own: each position neighbour takes the collision-free yaw channel closest to
its parent's, so the search stays two-dimensional while the footprint still
turns to squeeze through gaps.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from ..errors import InvalidGoalError, InvalidStartError, NoPathError
from ..geometry import Shape, shape_sdf
from .scene import Scene

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class PoseChannelMasks:
    """Footprint of the shape at K uniform yaws, as cell offsets.

    ``masks[k]`` is a (2r+1, 2r+1) boolean stamp indexed [dy + r, dx + r]:
    True where the cell centre at offset (dx, dy) cells from the body origin
    satisfies shape_sdf <= 0 at yaw_values[k].
    """

    yaw_values: NDArray[np.float64]
    masks: NDArray[np.bool_]
    cell_size: float

    @property
    def K(self) -> int:
        return len(self.yaw_values)

    @property
    def half(self) -> int:
        return (self.masks.shape[1] - 1) // 2

    def offsets(self, k: int) -> NDArray[np.int64]:
        """(n, 2) integer (dx, dy) offsets of the set cells of mask k."""
        dy, dx = np.nonzero(self.masks[k])
        return np.stack([dx - self.half, dy - self.half], axis=1)

    def channel_of(self, yaw: float) -> int:
        return int(round((yaw % TWO_PI) / TWO_PI * self.K)) % self.K


def build_masks(shape: Shape, cell_size: float, K: int = 36) -> PoseChannelMasks:
    r = int(math.ceil(shape.bounding_radius / cell_size)) + 1
    d = np.arange(-r, r + 1) * cell_size
    DX, DY = np.meshgrid(d, d)
    pts = np.stack([DX.ravel(), DY.ravel()], axis=1)
    yaws = np.arange(K) * TWO_PI / K
    masks = np.zeros((K, 2 * r + 1, 2 * r + 1), dtype=bool)
    for k, yaw in enumerate(yaws):
        c, s = math.cos(yaw), math.sin(yaw)
        local = pts @ np.array([[c, -s], [s, c]])  # R^T p, row-vector form
        masks[k] = (shape_sdf(shape, local) <= 0.0).reshape(2 * r + 1, 2 * r + 1)
    masks.setflags(write=False)
    return PoseChannelMasks(yaws, masks, cell_size)


def collide(masks: PoseChannelMasks, scene: Scene, ix: int, iy: int, yaw_index: int) -> bool:
    """Footprint at cell (ix, iy) and channel yaw_index hits an occupied or
    off-grid cell. Direct enumeration; see :class:`ChannelMaps` for the
    precomputed form used by the search."""
    occ = scene.occupancy
    ny, nx = occ.shape
    for dx, dy in masks.offsets(yaw_index):
        x, y = ix + dx, iy + dy
        if not (0 <= x < nx and 0 <= y < ny) or occ[y, x]:
            return True
    return False


class ChannelMaps:
    """Per-channel collision maps, built lazily by correlating the occupancy
    (padded with occupied cells) with each footprint stamp."""

    def __init__(self, masks: PoseChannelMasks, occupancy: NDArray[np.bool_]):
        self.masks = masks
        self.occ = np.asarray(occupancy, dtype=bool)
        self._maps: list[Optional[NDArray[np.bool_]]] = [None] * masks.K

    def map(self, k: int) -> NDArray[np.bool_]:
        m = self._maps[k]
        if m is None:
            w = self.masks.masks[k].astype(np.int32)
            m = ndimage.correlate(self.occ.astype(np.int32), w, mode="constant", cval=1) > 0
            self._maps[k] = m
        return m

    def collide(self, ix: int, iy: int, k: int) -> bool:
        ny, nx = self.occ.shape
        if not (0 <= ix < nx and 0 <= iy < ny):
            return True
        return bool(self.map(k)[iy, ix])


@dataclass(order=True)
class AStarNode:
    f_cost: float
    h_cost: float
    order: int
    ix: int = field(compare=False)
    iy: int = field(compare=False)
    yaw_index: int = field(compare=False)
    g_cost: float = field(compare=False)
    parent: Optional["AStarNode"] = field(compare=False, default=None, repr=False)


_MOVES = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]


def _yaw_scan(k0: int, K: int, max_step: int):
    """Channels by increasing |delta| from k0 (wrapping), up to max_step."""
    yield k0
    for d in range(1, min(max_step, K // 2) + 1):
        yield (k0 + d) % K
        if (k0 - d) % K != (k0 + d) % K:
            yield (k0 - d) % K


def _free_channel(maps: ChannelMaps, ix: int, iy: int, yaw: float, max_dev: int) -> Optional[int]:
    k0 = maps.masks.channel_of(yaw)
    for k in _yaw_scan(k0, maps.masks.K, max_dev):
        if not maps.collide(ix, iy, k):
            return k
    return None


@dataclass
class AStarResult:
    nodes: NDArray[np.float64]  # (n, 3) x, y, unwrapped yaw
    cells: list[tuple[int, int, int]]
    expanded: int


def inflate(occupancy: NDArray[np.bool_], cell_size: float, margin: float) -> NDArray[np.bool_]:
    """Occupied cells plus every cell centre within ``margin`` of one."""
    occ = np.asarray(occupancy, dtype=bool)
    if margin <= 0 or not occ.any():
        return occ
    return ndimage.distance_transform_edt(~occ, sampling=cell_size) <= margin


def astar_search(scene: Scene, masks: PoseChannelMasks, start=None, goal=None,
                 max_yaw_step: int = 3, max_pose_deviation: Optional[int] = None,
                 maps: Optional[ChannelMaps] = None, inflation: float = 0.0) -> AStarResult:
    """Shortest 8-connected path from start to goal cell.

    Each successor position takes the first collision-free channel when
    scanning outward from the parent's channel, at most ``max_yaw_step``
    channels away. Start and goal must be free at a channel within
    ``max_pose_deviation`` (default K/4) of their yaw. With ``inflation``
    the obstacles are grown by that distance first, so the path keeps
    clearance (and stays collision-free for the true map).

    Raises:
        InvalidStartError, InvalidGoalError, NoPathError
    """
    start = scene.start if start is None else start
    goal = scene.goal if goal is None else goal
    maps = maps or ChannelMaps(masks, inflate(scene.occupancy, scene.cell_size, inflation))
    K = masks.K
    dev = K // 4 if max_pose_deviation is None else max_pose_deviation
    sx, sy = scene.cell_of(start[0], start[1])
    gx, gy = scene.cell_of(goal[0], goal[1])
    if not scene.in_bounds(sx, sy):
        raise InvalidStartError("start outside the map")
    if not scene.in_bounds(gx, gy):
        raise InvalidGoalError("goal outside the map")
    k_start = _free_channel(maps, sx, sy, start[2], dev)
    if k_start is None:
        raise InvalidStartError(f"start {tuple(start)} collides at every nearby yaw")
    if _free_channel(maps, gx, gy, goal[2], dev) is None:
        raise InvalidGoalError(f"goal {tuple(goal)} collides at every nearby yaw")
    h = scene.cell_size
    gpos = scene.center_of(gx, gy)

    def heuristic(ix, iy):
        c = scene.center_of(ix, iy)
        return float(math.hypot(c[0] - gpos[0], c[1] - gpos[1]))

    order = 0
    h0 = heuristic(sx, sy)
    root = AStarNode(h0, h0, order, sx, sy, k_start, 0.0)
    open_heap = [root]
    best_g = {(sx, sy): 0.0}
    closed: set[tuple[int, int]] = set()
    goal_node = None
    expanded = 0
    while open_heap:
        node = heapq.heappop(open_heap)
        key = (node.ix, node.iy)
        if key in closed:
            continue
        closed.add(key)
        expanded += 1
        if key == (gx, gy):
            goal_node = node
            break
        for dx, dy in _MOVES:
            nx_, ny_ = node.ix + dx, node.iy + dy
            nk = (nx_, ny_)
            if nk in closed or not scene.in_bounds(nx_, ny_):
                continue
            step = h * (math.sqrt(2.0) if dx and dy else 1.0)
            g = node.g_cost + step
            if g >= best_g.get(nk, math.inf):
                continue
            k = None
            for kk in _yaw_scan(node.yaw_index, K, max_yaw_step):
                if not maps.collide(nx_, ny_, kk):
                    k = kk
                    break
            if k is None:
                continue
            best_g[nk] = g
            order += 1
            hh = heuristic(nx_, ny_)
            heapq.heappush(open_heap, AStarNode(g + hh, hh, order, nx_, ny_, k, g, node))
    if goal_node is None:
        raise NoPathError(f"no collision-free path after expanding {expanded} cells")
    chain = []
    n = goal_node
    while n is not None:
        chain.append((n.ix, n.iy, n.yaw_index))
        n = n.parent
    chain.reverse()
    ix = np.array([c[0] for c in chain])
    iy = np.array([c[1] for c in chain])
    xy = scene.center_of(ix, iy).reshape(-1, 2)
    yaw = np.unwrap(masks.yaw_values[[c[2] for c in chain]])
    return AStarResult(np.column_stack([xy, yaw]), chain, expanded)
