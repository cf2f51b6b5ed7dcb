"""Reference computations for the tests, independent of the library's search code."""

import numpy as np
from scipy.optimize import minimize_scalar

from sweptsdf import shape_sdf


def body_distance(problem, p, ts):
    """d(t) = sdf(T(t)^-1 p) at the given times, straight from the pose formula."""
    m = problem.motion
    poses = m.poses(ts)
    d = np.asarray(p, dtype=float) - poses[:, :2]
    c, s = np.cos(poses[:, 2]), np.sin(poses[:, 2])
    local = np.stack([c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]], axis=1)
    if problem.shape.time_varying:
        st = (np.asarray(ts) - m.t_start) / max(m.t_end - m.t_start, 1e-300)
        return np.array([shape_sdf(problem.shape, q, u) for q, u in zip(local, st)])
    return shape_sdf(problem.shape, local)


def dense_g(problem, p, dt=1e-4):
    """min over uniformly sampled times (an upper bound of g) and its time."""
    m = problem.motion
    n = max(2, int(np.ceil((m.t_end - m.t_start) / dt)) + 1)
    ts = np.linspace(m.t_start, m.t_end, n)
    d = body_distance(problem, p, ts)
    i = int(np.argmin(d))
    return float(d[i]), float(ts[i])


def local_minima(problem, p, n=4001):
    """Refined local minima of d(t) as sorted (value, t) pairs."""
    m = problem.motion
    ts = np.linspace(m.t_start, m.t_end, n)
    d = body_distance(problem, p, ts)
    idx = [i for i in range(n) if (i == 0 or d[i] <= d[i - 1]) and (i == n - 1 or d[i] <= d[i + 1])]
    out = []
    for i in idx:
        a, b = ts[max(i - 1, 0)], ts[min(i + 1, n - 1)]
        r = minimize_scalar(lambda t: body_distance(problem, p, [t])[0], bounds=(a, b), method="bounded",
                            options={"xatol": 1e-12})
        out.append((min(float(r.fun), float(d[i])), float(r.x) if r.fun <= d[i] else float(ts[i])))
    return sorted(out)


def unique_tstar(problem, p, gap=1e-6):
    """True unless two separate local minima come within ``gap`` of the best."""
    mins = local_minima(problem, p)
    if len(mins) < 2:
        return True
    (g0, t0), (g1, t1) = mins[0], mins[1]
    return g1 - g0 > gap or abs(t1 - t0) <= 10 * problem.descent_tolerance + 1e-6


def central_fd(f, x, h):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def smooth_local(shape, local_point, h=1e-6, tol=1e-4):
    """The body SDF has a unit gradient at the point (off its medial axis)."""
    g = central_fd(lambda z: shape_sdf(shape, z), local_point, h)
    return abs(float(np.linalg.norm(g)) - 1.0) <= tol


def differentiable_point(problem, p, metric):
    """Unique minimizing time and a smooth body SDF at the minimizing local point."""
    return unique_tstar(problem, p) and smooth_local(problem.shape, metric(problem, p).local_point)
