"""Minimum-jerk piecewise quintics parametrized by waypoints and durations.

A trajectory of N segments in m dimensions is fixed by its boundary state
(position, velocity, acceleration at both ends), N-1 interior waypoints q and
N durations T. The coefficients solve a banded 6N x 6N system: boundary rows,
waypoint interpolation and C4 continuity at every junction. Costs expressed in
coefficient space are pulled back to (q, T) with one adjoint solve.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_banded

from .errors import ConstructionError, DomainError

T_MIN = 0.01  # lower bound added by the positive time map
_BAND = 8  # lower and upper bandwidth of the constraint matrix
_TINY = 1e-9

# _FACT[k, j] = j! / (j - k)!  (derivative factor of t^j), zero for j < k
_FACT = np.array([[math.perm(j, k) if j >= k else 0 for j in range(6)] for k in range(6)], dtype=float)


def _basis(t: float, k: int) -> NDArray[np.float64]:
    """k-th derivative of [1, t, ..., t^5]."""
    out = np.zeros(6)
    for j in range(k, 6):
        out[j] = _FACT[k, j] * t ** (j - k)
    return out


@dataclass(frozen=True)
class Boundary:
    """Rows are position, velocity, acceleration; columns are dimensions."""

    start: NDArray[np.float64]
    end: NDArray[np.float64]

    def __post_init__(self) -> None:
        s = np.array(self.start, dtype=float)
        e = np.array(self.end, dtype=float)
        if s.ndim == 1:
            s = np.vstack([s, np.zeros((2, s.size))])
        if e.ndim == 1:
            e = np.vstack([e, np.zeros((2, e.size))])
        if s.shape != e.shape or s.shape[0] != 3:
            raise ValueError("boundary states must both be 3 x m")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(e))):
            raise ValueError("boundary states must be finite")
        s.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "end", e)

    @property
    def dims(self) -> int:
        return self.start.shape[1]

    @classmethod
    def rest(cls, start: ArrayLike, end: ArrayLike) -> "Boundary":
        """Zero velocity and acceleration at both ends."""
        return cls(np.asarray(start, dtype=float), np.asarray(end, dtype=float))

    def to_dict(self) -> dict[str, Any]:
        return {"start": self.start.tolist(), "end": self.end.tolist()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Boundary":
        return cls(np.array(d["start"]), np.array(d["end"]))


@dataclass(frozen=True, eq=False)
class PolyTrajectory:
    """Piecewise quintic; ``coeffs[i, j, d]`` multiplies (t - t_i)^j."""

    coeffs: NDArray[np.float64]
    durations: NDArray[np.float64]
    boundary: Boundary

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=float)
        T = np.array(self.durations, dtype=float).reshape(-1)
        if c.ndim != 3 or c.shape[1] != 6 or c.shape[0] != T.size:
            raise ValueError("coeffs must be N x 6 x m with N durations")
        if np.any(~(T > 0)):
            raise ValueError("durations must be positive")
        c.setflags(write=False)
        T.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "durations", T)

    @property
    def dims(self) -> int:
        return self.coeffs.shape[2]

    @property
    def segments(self) -> int:
        return self.coeffs.shape[0]

    @property
    def breaks(self) -> NDArray[np.float64]:
        return np.concatenate([[0.0], np.cumsum(self.durations)])

    @property
    def total_time(self) -> float:
        return float(np.sum(self.durations))

    @property
    def waypoints(self) -> NDArray[np.float64]:
        """Interior junction positions, (N-1) x m."""
        return np.array([_basis(T, 0) @ self.coeffs[i] for i, T in enumerate(self.durations[:-1])]).reshape(
            -1, self.dims)

    def locate(self, t: ArrayLike) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
        """Segment index and local time, right-continuous at junctions."""
        t = np.asarray(t, dtype=float)
        b = self.breaks
        idx = np.clip(np.searchsorted(b, t, side="right") - 1, 0, self.segments - 1)
        return idx, t - b[idx]

    def eval(self, t: float, k: int = 0) -> NDArray[np.float64]:
        """k-th derivative (k in 0..4) at t in [0, total_time]."""
        if not 0 <= k <= 4:
            raise ValueError("derivative order must be in 0..4")
        if not (0.0 <= t <= self.total_time * (1 + 1e-12)):
            raise DomainError(f"t={t} outside [0, {self.total_time}]")
        i, tau = self.locate(t)
        return _basis(float(tau), k) @ self.coeffs[int(i)]

    def sample(self, ts: ArrayLike, k: int = 0) -> NDArray[np.float64]:
        """Vectorized eval; times are clamped to the domain."""
        ts = np.clip(np.asarray(ts, dtype=float), 0.0, self.total_time)
        idx, tau = self.locate(ts)
        j = np.arange(6)
        powers = np.where(j >= k, np.power(tau[..., None], np.maximum(j - k, 0)), 0.0) * _FACT[k]
        return np.einsum("...j,...jd->...d", powers, self.coeffs[idx])

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {"coeffs": self.coeffs.tolist(), "durations": self.durations.tolist(),
                "boundary": self.boundary.to_dict()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PolyTrajectory":
        return cls(np.array(d["coeffs"], dtype=float), np.array(d["durations"], dtype=float),
                   Boundary.from_dict(d["boundary"]))

    def save_json(self, path: str | os.PathLike) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load_json(cls, path: str | os.PathLike) -> "PolyTrajectory":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def save_csv(self, path: str | os.PathLike, step: float) -> None:
        """Rows (t, x, y, yaw, vx, vy, yaw_rate); needs an (x, y, yaw) trajectory."""
        if self.dims != 3:
            raise ValueError("CSV export expects x, y, yaw")
        if not step > 0:
            raise ValueError("step must be positive")
        ts = np.arange(0.0, self.total_time, step)
        ts = np.append(ts, self.total_time)
        p = self.sample(ts, 0)
        v = self.sample(ts, 1)
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t", "x", "y", "yaw", "vx", "vy", "yaw_rate"])
            for row in np.column_stack([ts, p, v]):
                w.writerow([repr(float(x)) for x in row])


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def _basis_stack(T: NDArray[np.float64], orders: int = 5) -> NDArray[np.float64]:
    """(len(T), orders, 6): derivatives 0..orders-1 of [1, t, ..., t^5] at each T."""
    j = np.arange(6)
    k = np.arange(orders)[:, None]
    e = np.maximum(j - k, 0)
    return np.where(j >= k, np.asarray(T, dtype=float)[:, None, None] ** e, 0.0) * _FACT[:orders]


def _entries(T: NDArray[np.float64]):
    """Entries (row, col, value) of the constraint matrix for durations T,
    listed per 6-wide row chunk (zeros included, no duplicates)."""
    N = T.size
    P = _basis_stack(T)
    Z = _basis_stack(np.zeros(1))[0]
    j = np.arange(6)
    rows = [np.repeat(np.arange(3), 6), np.repeat(6 * N - 3 + np.arange(3), 6)]
    cols = [np.tile(j, 3), np.tile(6 * (N - 1) + j, 3)]
    vals = [Z[:3].ravel(), P[N - 1, :3].ravel()]
    if N > 1:
        i = np.arange(N - 1)[:, None, None]
        # rows 3+6i .. 8+6i: waypoint, then continuity of derivatives 0..4
        left = np.concatenate([P[:-1, :1], P[:-1]], axis=1)  # (N-1, 6, 6)
        r = 3 + 6 * i + np.arange(6)[None, :, None]
        rows.append(np.broadcast_to(r, left.shape).ravel())
        cols.append(np.broadcast_to(6 * i + j, left.shape).ravel())
        vals.append(left.ravel())
        r = 4 + 6 * i + np.arange(5)[None, :, None]
        right = np.broadcast_to(-Z, (N - 1, 5, 6))
        rows.append(np.broadcast_to(r, right.shape).ravel())
        cols.append(np.broadcast_to(6 * (i + 1) + j, right.shape).ravel())
        vals.append(right.ravel())
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def _banded(T: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Band storage of the matrix and of its transpose."""
    n = 6 * T.size
    r, c, v = _entries(T)
    ab = np.zeros((2 * _BAND + 1, n))
    abt = np.zeros((2 * _BAND + 1, n))
    ab[_BAND + r - c, c] = v
    abt[_BAND + c - r, r] = v
    return ab, abt


def _rhs(boundary: Boundary, q: NDArray[np.float64], N: int) -> NDArray[np.float64]:
    m = boundary.dims
    b = np.zeros((6 * N, m))
    b[0:3] = boundary.start
    for i in range(N - 1):
        b[3 + 6 * i] = q[i]
    b[6 * N - 3:] = boundary.end
    return b


def _check_inputs(boundary: Boundary, q: ArrayLike, T: ArrayLike):
    T = np.asarray(T, dtype=float).reshape(-1)
    N = T.size
    if N < 1:
        raise ConstructionError("need at least one segment")
    if np.any(~np.isfinite(T)) or np.any(T <= _TINY):
        raise ConstructionError("durations must be finite and > 1e-9")
    q = np.asarray(q, dtype=float).reshape(-1, boundary.dims) if N > 1 else np.zeros((0, boundary.dims))
    if q.shape[0] != N - 1:
        raise ConstructionError(f"expected {N - 1} waypoints, got {q.shape[0]}")
    if not np.all(np.isfinite(q)):
        raise ConstructionError("waypoints must be finite")
    return q, T


def minco_construct(boundary: Boundary, q: ArrayLike, T: ArrayLike) -> PolyTrajectory:
    """Jerk-optimal piecewise quintic through waypoints q with durations T.

    Raises:
        ConstructionError: non-positive or tiny durations, wrong waypoint
            count, or a numerically singular system.
    """
    q, T = _check_inputs(boundary, q, T)
    N = T.size
    ab, _ = _banded(T)
    try:
        c = solve_banded((_BAND, _BAND), ab, _rhs(boundary, q, N), check_finite=False)
    except np.linalg.LinAlgError as e:  # pragma: no cover - guarded by the duration check
        raise ConstructionError(f"singular trajectory system: {e}") from e
    if not np.all(np.isfinite(c)):
        raise ConstructionError("trajectory system is numerically singular")
    return PolyTrajectory(c.reshape(N, 6, boundary.dims), T, boundary)


def propagate_gradient(traj: PolyTrajectory, dJ_dc: ArrayLike,
                       dJ_dT_direct: Optional[ArrayLike] = None) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Pull dJ/dc and the explicit dJ/dT back to (q, T).

    With M(T) c = b(q): lambda = M^-T dJ/dc, dH/dq_i = lambda at the
    waypoint row of junction i, dH/dT = dJ/dT - lambda^T (dM/dT) c.
    """
    N, m = traj.segments, traj.dims
    G = np.asarray(dJ_dc, dtype=float).reshape(N, 6, m)
    dT = np.zeros(N) if dJ_dT_direct is None else np.array(dJ_dT_direct, dtype=float).reshape(N)
    _, abt = _banded(traj.durations)
    lam = solve_banded((_BAND, _BAND), abt, G.reshape(6 * N, m), check_finite=False)
    dq = np.array([lam[3 + 6 * i] for i in range(N - 1)]).reshape(N - 1, m)
    c = traj.coeffs
    T = traj.durations
    # d/dT of row entries beta_k(T) is beta_{k+1}(T)
    D = np.einsum("nkj,njd->nkd", _basis_stack(T, 6)[:, 1:], c)  # (N, 5, m)
    if N > 1:
        L = lam[3:6 * N - 3].reshape(N - 1, 6, m)
        # row 3+6i: p_i(T_i); rows 4+6i+k: k-th derivative continuity
        dT[:-1] -= np.einsum("nd,nd->n", L[:, 0], D[:-1, 0])
        dT[:-1] -= np.einsum("nkd,nkd->n", L[:, 1:], D[:-1, :5])
    dT[N - 1] -= np.einsum("kd,kd->", lam[6 * N - 3:], D[N - 1, :3])
    return dq, dT


def control_effort(traj: PolyTrajectory) -> tuple[float, NDArray[np.float64], NDArray[np.float64]]:
    """Sum of integrated squared jerk, with gradients wrt coeffs and durations."""
    c = traj.coeffs
    T = traj.durations[:, None]
    c3, c4, c5 = c[:, 3], c[:, 4], c[:, 5]
    J = (36 * c3 ** 2 * T + 144 * c3 * c4 * T ** 2 + 192 * c4 ** 2 * T ** 3
         + 240 * c3 * c5 * T ** 3 + 720 * c4 * c5 * T ** 4 + 720 * c5 ** 2 * T ** 5)
    g = np.zeros_like(c)
    g[:, 3] = 72 * c3 * T + 144 * c4 * T ** 2 + 240 * c5 * T ** 3
    g[:, 4] = 144 * c3 * T ** 2 + 384 * c4 * T ** 3 + 720 * c5 * T ** 4
    g[:, 5] = 240 * c3 * T ** 3 + 720 * c4 * T ** 4 + 1440 * c5 * T ** 5
    jerk_end = 6 * c3 + 24 * c4 * T + 60 * c5 * T ** 2
    return float(J.sum()), g, np.sum(jerk_end ** 2, axis=1)


# ---------------------------------------------------------------------------
# unconstrained parametrization
# ---------------------------------------------------------------------------


def softplus(x: ArrayLike) -> NDArray[np.float64]:
    return np.logaddexp(0.0, np.asarray(x, dtype=float))


def tau_to_T(tau: ArrayLike) -> NDArray[np.float64]:
    return softplus(tau) + T_MIN


def T_to_tau(T: ArrayLike) -> NDArray[np.float64]:
    y = np.asarray(T, dtype=float) - T_MIN
    if np.any(y <= 0):
        raise ValueError(f"durations must exceed {T_MIN}")
    # log(exp(y) - 1), stable for both small and large y
    return y + np.log(-np.expm1(-y))


def dT_dtau(tau: ArrayLike) -> NDArray[np.float64]:
    tau = np.asarray(tau, dtype=float)
    return 0.5 * (1.0 + np.tanh(0.5 * tau))


@dataclass(frozen=True)
class WaypointParams:
    """Interior waypoints and unconstrained time surrogates."""

    q: NDArray[np.float64]
    tau: NDArray[np.float64]

    @property
    def T(self) -> NDArray[np.float64]:
        return tau_to_T(self.tau)

    @classmethod
    def from_durations(cls, q: ArrayLike, T: ArrayLike) -> "WaypointParams":
        return cls(np.asarray(q, dtype=float), T_to_tau(T))

    def pack(self) -> NDArray[np.float64]:
        return np.concatenate([self.q.ravel(), self.tau.ravel()])

    @classmethod
    def unpack(cls, x: ArrayLike, N: int, m: int) -> "WaypointParams":
        x = np.asarray(x, dtype=float)
        k = (N - 1) * m
        return cls(x[:k].reshape(N - 1, m), x[k:k + N].copy())
