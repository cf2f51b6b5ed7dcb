"""Planar shapes with exact signed distance functions, SE(2) poses and motions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import _kernels as K
from .errors import DomainError, ShapeValidationError

SHAPE_KINDS = ("disk", "box", "convex_polygon", "polygon", "union", "time_varying_disk")


def rot(yaw: float) -> NDArray[np.float64]:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


# ---------------------------------------------------------------------------
# polygon validation
# ---------------------------------------------------------------------------


def _signed_area(v: NDArray[np.float64]) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_seg(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 * o2 != 0 and o3 * o4 != 0:
        return True
    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


def validate_polygon(vertices: ArrayLike, convex: bool = False) -> NDArray[np.float64]:
    """Check a simple polygon and return its vertices in CCW order.

    Raises:
        ShapeValidationError: fewer than 3 vertices, zero area, repeated
            vertices, self-intersection, or (``convex=True``) a reflex vertex.
    """
    v = np.array(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
        raise ShapeValidationError("polygon needs at least 3 two-dimensional vertices")
    if not np.all(np.isfinite(v)):
        raise ShapeValidationError("polygon vertices must be finite")
    n = v.shape[0]
    if np.any(np.linalg.norm(v - np.roll(v, -1, axis=0), axis=1) == 0.0):
        raise ShapeValidationError("polygon has repeated consecutive vertices")
    area = _signed_area(v)
    if abs(area) < 1e-12:
        raise ShapeValidationError("polygon has zero area")
    if area < 0:
        v = v[::-1].copy()
    for i in range(n):
        a1, a2 = v[i], v[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if _segments_cross(a1, a2, v[j], v[(j + 1) % n]):
                raise ShapeValidationError(f"polygon edges {i} and {j} intersect")
    if convex:
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.any(cross < -1e-12):
            raise ShapeValidationError("polygon is not convex")
    return v


# ---------------------------------------------------------------------------
# Shape
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Shape:
    """Immutable body with an SDF in its own frame.

    Build through the classmethods; ``parts`` holds child shapes of a union.
    Polygons are stored CCW. Time-varying disks interpolate their radius
    affinely over normalized shape time ``s`` in [0, 1].
    """

    kind: str
    params: dict[str, Any]
    parts: tuple["Shape", ...] = ()
    kinds: NDArray[np.int64] = field(repr=False, default=None)
    prim_params: NDArray[np.float64] = field(repr=False, default=None)
    verts: NDArray[np.float64] = field(repr=False, default=None)
    offsets: NDArray[np.int64] = field(repr=False, default=None)
    bounding_radius: float = 0.0

    # -- constructors -----------------------------------------------------

    @classmethod
    def disk(cls, radius: float, center: Sequence[float] = (0.0, 0.0)) -> "Shape":
        if not radius > 0:
            raise ShapeValidationError("disk radius must be positive")
        c = [float(center[0]), float(center[1])]
        return cls._build("disk", {"radius": float(radius), "center": c},
                          [(K.KIND_DISK, (c[0], c[1], float(radius), 0.0), None)])

    @classmethod
    def time_varying_disk(cls, radius_start: float, radius_end: float,
                          center: Sequence[float] = (0.0, 0.0)) -> "Shape":
        if radius_start < 0 or radius_end < 0 or max(radius_start, radius_end) == 0:
            raise ShapeValidationError("time-varying disk radii must be non-negative, not both zero")
        c = [float(center[0]), float(center[1])]
        r0, r1 = float(radius_start), float(radius_end)
        return cls._build("time_varying_disk", {"radius_start": r0, "radius_end": r1, "center": c},
                          [(K.KIND_DISK, (c[0], c[1], r0, r1 - r0), None)])

    @classmethod
    def box(cls, half_extents: Sequence[float], center: Sequence[float] = (0.0, 0.0)) -> "Shape":
        hx, hy = float(half_extents[0]), float(half_extents[1])
        if not (hx > 0 and hy > 0):
            raise ShapeValidationError("box half extents must be positive")
        cx, cy = float(center[0]), float(center[1])
        v = np.array([[cx - hx, cy - hy], [cx + hx, cy - hy], [cx + hx, cy + hy], [cx - hx, cy + hy]])
        return cls._build("box", {"half_extents": [hx, hy], "center": [cx, cy]},
                          [(K.KIND_POLYGON, (0.0, 0.0, 0.0, 0.0), v)])

    @classmethod
    def polygon(cls, vertices: ArrayLike) -> "Shape":
        """Simple polygon, convex or not; CW input is reversed."""
        v = validate_polygon(vertices)
        return cls._build("polygon", {"vertices": v.tolist()},
                          [(K.KIND_POLYGON, (0.0, 0.0, 0.0, 0.0), v)])

    @classmethod
    def convex_polygon(cls, vertices: ArrayLike) -> "Shape":
        v = validate_polygon(vertices, convex=True)
        return cls._build("convex_polygon", {"vertices": v.tolist()},
                          [(K.KIND_POLYGON, (0.0, 0.0, 0.0, 0.0), v)])

    @classmethod
    def union(cls, parts: Sequence["Shape"]) -> "Shape":
        """Union by min of the part SDFs: exact outside, an upper bound inside
        where parts overlap."""
        parts = tuple(parts)
        if not parts:
            raise ShapeValidationError("union needs at least one part")
        prims = []
        for p in parts:
            for k in range(p.kinds.shape[0]):
                a, b = p.offsets[k], p.offsets[k + 1]
                prims.append((int(p.kinds[k]), tuple(p.prim_params[k]),
                              p.verts[a:b] if b > a else None))
        return cls._build("union", {}, prims, parts)

    @classmethod
    def _build(cls, kind, params, prims, parts=()) -> "Shape":
        kinds = np.array([p[0] for p in prims], dtype=np.int64)
        pp = np.array([p[1] for p in prims], dtype=float).reshape(-1, 4)
        chunks = [p[2] for p in prims]
        offsets = np.zeros(len(prims) + 1, dtype=np.int64)
        for i, ch in enumerate(chunks):
            offsets[i + 1] = offsets[i] + (0 if ch is None else len(ch))
        verts = np.concatenate([c for c in chunks if c is not None]) if any(
            c is not None for c in chunks) else np.zeros((0, 2))
        radius = 0.0
        for k, ch in enumerate(chunks):
            if kinds[k] == K.KIND_DISK:
                cx, cy, r0, r1 = pp[k]
                radius = max(radius, math.hypot(cx, cy) + max(r0, r0 + r1))
            else:
                radius = max(radius, float(np.max(np.linalg.norm(ch, axis=1))))
        for a in (kinds, pp, verts, offsets):
            a.setflags(write=False)
        return cls(kind, params, tuple(parts), kinds, pp, np.ascontiguousarray(verts), offsets, radius)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "union":
            return {"kind": "union", "parts": [p.to_dict() for p in self.parts]}
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Shape":
        kind = d.get("kind")
        if kind == "disk":
            return cls.disk(d["radius"], d.get("center", (0.0, 0.0)))
        if kind == "time_varying_disk":
            return cls.time_varying_disk(d["radius_start"], d["radius_end"], d.get("center", (0.0, 0.0)))
        if kind == "box":
            return cls.box(d["half_extents"], d.get("center", (0.0, 0.0)))
        if kind == "polygon":
            return cls.polygon(d["vertices"])
        if kind == "convex_polygon":
            return cls.convex_polygon(d["vertices"])
        if kind == "union":
            return cls.union([cls.from_dict(p) for p in d["parts"]])
        raise ShapeValidationError(f"unknown shape kind {kind!r}")

    @property
    def time_varying(self) -> bool:
        return bool(np.any(self.prim_params[self.kinds == K.KIND_DISK, 3] != 0.0))

    @property
    def radius_rate(self) -> float:
        """Max |d sdf / d shape_time| over the primitives."""
        disks = self.kinds == K.KIND_DISK
        return float(np.max(np.abs(self.prim_params[disks, 3]))) if disks.any() else 0.0

    @property
    def arrays(self):
        return self.kinds, self.prim_params, self.verts, self.offsets


def l_shape(arm: float = 2.0, thickness: float = 1.0, centered: bool = True) -> Shape:
    """L polygon = [0, arm] x [0, thickness] U [0, thickness] x [0, arm].

    With ``centered`` the body origin is moved to the bounding-box centre.
    """
    v = np.array([[0, 0], [arm, 0], [arm, thickness], [thickness, thickness],
                  [thickness, arm], [0, arm]], dtype=float)
    if centered:
        v = v - arm / 2.0
    return Shape.polygon(v)


def shape_sdf(shape: Shape, local_point: ArrayLike, shape_time: float = 0.0):
    """Signed distance of body-frame point(s); negative inside.

    ``local_point`` may be a single 2-vector (returns float) or an (N, 2) array.
    """
    p = np.asarray(local_point, dtype=float)
    if p.ndim == 1:
        return K.shape_sdf(*shape.arrays, p[0], p[1], float(shape_time))[0]
    return K.shape_sdf_batch(*shape.arrays, np.ascontiguousarray(p.reshape(-1, 2)),
                             float(shape_time))[:, 0]


def shape_sdf_gradient(shape: Shape, local_point: ArrayLike, shape_time: float = 0.0):
    """Unit gradient of the SDF (a subgradient on the medial axis)."""
    p = np.asarray(local_point, dtype=float)
    if p.ndim == 1:
        _, gx, gy, _ = K.shape_sdf(*shape.arrays, p[0], p[1], float(shape_time))
        return np.array([gx, gy])
    return K.shape_sdf_batch(*shape.arrays, np.ascontiguousarray(p.reshape(-1, 2)),
                             float(shape_time))[:, 1:]


# ---------------------------------------------------------------------------
# poses and motions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pose2:
    translation: tuple[float, float]
    yaw: float

    def body_to_world(self, p: ArrayLike) -> NDArray[np.float64]:
        p = np.asarray(p, dtype=float)
        return p @ rot(self.yaw).T + np.asarray(self.translation)

    def world_to_body(self, p: ArrayLike) -> NDArray[np.float64]:
        p = np.asarray(p, dtype=float)
        return (p - np.asarray(self.translation)) @ rot(self.yaw)


@dataclass(frozen=True, eq=False)
class Motion:
    """Rigid SE(2) motion as a piecewise polynomial in (x, y, yaw).

    ``coeffs[i, k, dim]`` multiplies ``(t - breaks[i]) ** k`` on segment i.
    Analytic test motions are degree-1 special cases.
    """

    coeffs: NDArray[np.float64]
    breaks: NDArray[np.float64]
    kind: str = "trajectory"
    spec: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        c = np.ascontiguousarray(self.coeffs, dtype=float)
        b = np.ascontiguousarray(self.breaks, dtype=float)
        if c.ndim != 3 or c.shape[2] != 3 or b.shape != (c.shape[0] + 1,):
            raise ValueError("coeffs must be (N, deg+1, 3) with N+1 breaks")
        if np.any(np.diff(b) < 0):
            raise ValueError("breaks must be non-decreasing")
        c.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "breaks", b)

    @classmethod
    def constant(cls, pose: Pose2 | Sequence[float], t_start: float = 0.0, t_end: float = 1.0) -> "Motion":
        x, y, yaw = _pose_tuple(pose)
        c = np.zeros((1, 2, 3))
        c[0, 0] = (x, y, yaw)
        return cls(c, np.array([t_start, t_end], dtype=float), "constant",
                   {"kind": "constant", "pose": [x, y, yaw], "t_start": t_start, "t_end": t_end})

    @classmethod
    def linear(cls, start: Pose2 | Sequence[float], end: Pose2 | Sequence[float],
               t_start: float = 0.0, t_end: float = 1.0) -> "Motion":
        """Linear translation and linear yaw between two poses."""
        if not t_end > t_start:
            raise DomainError("linear motion needs t_end > t_start")
        a = np.array(_pose_tuple(start))
        b = np.array(_pose_tuple(end))
        c = np.zeros((1, 2, 3))
        c[0, 0] = a
        c[0, 1] = (b - a) / (t_end - t_start)
        return cls(c, np.array([t_start, t_end], dtype=float), "linear",
                   {"kind": "linear", "start": a.tolist(), "end": b.tolist(),
                    "t_start": t_start, "t_end": t_end})

    @classmethod
    def from_trajectory(cls, traj, t_start: float = 0.0) -> "Motion":
        """Interpret a 3-dimensional PolyTrajectory as (x, y, yaw)."""
        if traj.dims != 3:
            raise ValueError("trajectory must have dims (x, y, yaw)")
        breaks = t_start + np.concatenate([[0.0], np.cumsum(traj.durations)])
        return cls(traj.coeffs, breaks, "trajectory")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Motion":
        kind = d.get("kind")
        if kind == "constant":
            return cls.constant(d["pose"], d.get("t_start", 0.0), d.get("t_end", 1.0))
        if kind == "linear":
            return cls.linear(d["start"], d["end"], d.get("t_start", 0.0), d.get("t_end", 1.0))
        if kind == "trajectory":
            from .traj import PolyTrajectory

            return cls.from_trajectory(PolyTrajectory.from_dict(d["trajectory"]), d.get("t_start", 0.0))
        raise ValueError(f"unknown motion kind {kind!r}")

    @property
    def t_start(self) -> float:
        return float(self.breaks[0])

    @property
    def t_end(self) -> float:
        return float(self.breaks[-1])

    def _check(self, t: float, clamp: bool) -> float:
        if not (self.t_start <= t <= self.t_end):
            if not clamp:
                raise DomainError(f"t={t} outside [{self.t_start}, {self.t_end}]")
            t = min(max(t, self.t_start), self.t_end)
        return float(t)

    def pose_at(self, t: float, clamp: bool = False) -> Pose2:
        t = self._check(t, clamp)
        x, y, yaw, _, _, _ = K.pose_and_rate(self.coeffs, self.breaks, t)
        return Pose2((x, y), yaw)

    def rate_at(self, t: float, clamp: bool = False) -> NDArray[np.float64]:
        """(vx, vy, yaw_rate) at t."""
        t = self._check(t, clamp)
        return np.array(K.pose_and_rate(self.coeffs, self.breaks, t)[3:])

    def poses(self, ts: ArrayLike) -> NDArray[np.float64]:
        """(N, 3) array of (x, y, yaw); times are clamped to the domain."""
        ts = np.clip(np.asarray(ts, dtype=float), self.t_start, self.t_end)
        return K.sample_poses(self.coeffs, self.breaks, np.ascontiguousarray(ts))

    def inverse_transform(self, t: float, world_point: ArrayLike, clamp: bool = False) -> NDArray[np.float64]:
        return self.pose_at(t, clamp).world_to_body(world_point)

    def rate_bounds(self, per_segment: int = 256) -> tuple[float, float]:
        """Conservative (max translational speed, max |yaw rate|)."""
        return K.rate_bounds(self.coeffs, self.breaks, per_segment)

    def path_length(self, samples: int = 1024) -> float:
        p = self.poses(np.linspace(self.t_start, self.t_end, samples + 1))
        return float(np.sum(np.linalg.norm(np.diff(p[:, :2], axis=0), axis=1)))


def _pose_tuple(pose) -> tuple[float, float, float]:
    if isinstance(pose, Pose2):
        return float(pose.translation[0]), float(pose.translation[1]), float(pose.yaw)
    x, y, yaw = pose
    return float(x), float(y), float(yaw)


def pose_at(motion: Motion, t: float, clamp: bool = False) -> Pose2:
    return motion.pose_at(t, clamp)
