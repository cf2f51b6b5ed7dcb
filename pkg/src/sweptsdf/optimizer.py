"""Smoothed L1 penalty and a limited-memory BFGS minimizer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

Objective = Callable[[NDArray[np.float64]], tuple[float, NDArray[np.float64]]]


# ---------------------------------------------------------------------------
# smoothed L1
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothedL1Params:
    mu: float = 0.01

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ValueError("mu must be positive")


def smoothed_l1(x: ArrayLike, mu: float = 0.01):
    """C2 hinge: 0 for x <= 0, (mu - x/2)(x/mu)^3 up to mu, x - mu/2 beyond.

    Works on scalars and arrays; returns (value, derivative).
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    x = np.asarray(x, dtype=float)
    r = np.clip(x / mu, 0.0, 1.0)
    mid = (mu - 0.5 * x) * r ** 3
    dmid = (3.0 - 2.0 * r) * r ** 2  # 3x^2/mu^2 - 2x^3/mu^3
    v = np.where(x <= 0, 0.0, np.where(x <= mu, mid, x - 0.5 * mu))
    d = np.where(x <= 0, 0.0, np.where(x <= mu, dmid, 1.0))
    if v.ndim == 0:
        return float(v), float(d)
    return v, d


def smoothed_l1_second(x: ArrayLike, mu: float = 0.01):
    """Second derivative of :func:`smoothed_l1`."""
    x = np.asarray(x, dtype=float)
    r = np.clip(x / mu, 0.0, 1.0)
    return np.where((x > 0) & (x <= mu), 6.0 * r * (1.0 - r) / mu, 0.0)


# ---------------------------------------------------------------------------
# L-BFGS
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 8
    grad_tolerance: float = 1e-6  # on the infinity norm
    max_evals: int = 1000
    c1: float = 1e-4
    c2: float = 0.9
    f_tolerance: float = 0.0  # relative decrease over `past` iterations; 0 disables
    past: int = 3
    max_step: float = 1e20
    max_displacement: float = math.inf  # cap on the infinity norm of a trial step
    polish_step: bool = True  # one cubic-interpolation probe after the first trial

    def __post_init__(self) -> None:
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.memory < 1 or self.max_evals < 1:
            raise ValueError("memory and max_evals must be positive")


@dataclass
class LbfgsResult:
    x: NDArray[np.float64]
    value: float
    status: str  # converged | max_evals | line_search_failed | stalled
    iterations: int
    evaluations: int
    grad_norm: float
    history: list[float] = field(default_factory=list)

    def __iter__(self):  # allows x, f, status = lbfgs_minimize(...)
        return iter((self.x, self.value, self.status))


class _Counter:
    def __init__(self, fun: Objective, budget: int):
        self.fun = fun
        self.budget = budget
        self.n = 0

    def __call__(self, x):
        self.n += 1
        f, g = self.fun(x)
        return float(f), np.asarray(g, dtype=float).copy()


def _cubic_min(a, fa, da, b, fb, db) -> Optional[float]:
    """Minimizer of the cubic through (a, fa, da), (b, fb, db), or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    den = db - da + 2.0 * d2
    if den == 0:
        return None
    t = b - (b - a) * (db + d2 - d1) / den
    return t if math.isfinite(t) else None


def _interpolate(a, fa, da, b, fb, db) -> float:
    lo, hi = min(a, b), max(a, b)
    t = _cubic_min(a, fa, da, b, fb, db)
    w = hi - lo
    if t is None or not (lo + 0.1 * w <= t <= hi - 0.1 * w):
        t = 0.5 * (a + b)
    return t


def _line_search(phi, f0, d0, a1, cfg: LbfgsConfig, counter: _Counter, a_max: float = math.inf):
    """Strong-Wolfe bracketing and zoom. Returns (alpha, f, g, ok).

    Close to a minimizer the decrease c1 * a * d0 drops below the rounding
    error of f. There the Armijo test is replaced by its derivative form
    (2 c1 - 1) d0 >= phi'(a) (approximate Wolfe); f(a) may then exceed f0
    by at most its rounding noise, 1e-14 |f0|.
    """

    def armijo_fails(a, fa, da):
        if fa <= f0 + cfg.c1 * a * d0:
            return False
        noisy = abs(cfg.c1 * a * d0) <= 1e-10 * max(abs(f0), 1e-300)
        return not (noisy and fa <= f0 + 1e-14 * abs(f0) and (2.0 * cfg.c1 - 1.0) * d0 >= da)

    def zoom(lo, flo, dlo, hi, fhi, dhi):
        for _ in range(30):
            if counter.n >= counter.budget:
                break
            a = _interpolate(lo, flo, dlo, hi, fhi, dhi)
            fa, ga, da = phi(a)
            if armijo_fails(a, fa, da) or (fa >= flo and fa > f0 + cfg.c1 * a * d0):
                hi, fhi, dhi = a, fa, da
            else:
                if abs(da) <= -cfg.c2 * d0:
                    return a, fa, ga, True
                if da * (hi - lo) >= 0:
                    hi, fhi, dhi = lo, flo, dlo
                lo, flo, dlo = a, fa, da
            if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo)):
                break
        return None

    a_prev, f_prev, d_prev = 0.0, f0, d0
    a = a1
    best = None
    for i in range(40):
        if counter.n >= counter.budget:
            break
        fa, ga, da = phi(a)
        if not math.isfinite(fa):
            a = 0.5 * (a_prev + a)
            continue
        if armijo_fails(a, fa, da) or (i > 0 and fa >= f_prev and fa > f0 + cfg.c1 * a * d0):
            best = zoom(a_prev, f_prev, d_prev, a, fa, da)
            break
        if abs(da) <= -cfg.c2 * d0:
            best = (a, fa, ga, True)
            break
        if da >= 0:
            best = zoom(a, fa, da, a_prev, f_prev, d_prev)
            break
        if a >= min(cfg.max_step, a_max):
            best = (a, fa, ga, True)  # sufficient decrease at the largest allowed step
            break
        a_prev, f_prev, d_prev = a, fa, da
        a = min(2.0 * a, cfg.max_step, a_max)
    if best is None:
        return 0.0, f0, None, False
    return best


def lbfgs_minimize(objective: Objective, x0: ArrayLike,
                   config: Optional[LbfgsConfig] = None,
                   callback: Optional[Callable[[NDArray[np.float64], float], None]] = None) -> LbfgsResult:
    """Minimize a smooth function given as x -> (value, gradient).

    Raises:
        ValueError: non-finite value or gradient at x0.
    """
    cfg = config or LbfgsConfig()
    counter = _Counter(objective, cfg.max_evals)
    x = np.array(x0, dtype=float).ravel()
    f, g = counter(x)
    if not (math.isfinite(f) and np.all(np.isfinite(g))):
        raise ValueError("objective is not finite at x0")
    history = [f]
    S: list[NDArray] = []
    Y: list[NDArray] = []
    it = 0
    status = "max_evals"
    while True:
        gn = float(np.max(np.abs(g))) if g.size else 0.0
        if gn <= cfg.grad_tolerance:
            status = "converged"
            break
        if counter.n >= cfg.max_evals:
            status = "max_evals"
            break
        # two-loop recursion
        d = -g.copy()
        alphas = []
        for s, y in zip(reversed(S), reversed(Y)):
            rho = 1.0 / (y @ s)
            a = rho * (s @ d)
            alphas.append((a, rho))
            d -= a * y
        if S:
            d *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
        for (s, y), (a, rho) in zip(zip(S, Y), reversed(alphas)):
            b = rho * (y @ d)
            d += (a - b) * s
        d0 = float(g @ d)
        if not d0 < 0:
            S.clear()
            Y.clear()
            d = -g
            d0 = float(g @ d)
        a1 = 1.0 if S else min(1.0, 1.0 / max(float(np.linalg.norm(d)), 1e-300))
        a_max = cfg.max_step
        if math.isfinite(cfg.max_displacement):
            a_max = min(a_max, cfg.max_displacement / max(float(np.max(np.abs(d))), 1e-300))
        a1 = min(a1, a_max)

        def phi(a, x=x, d=d):
            fa, ga = counter(x + a * d)
            return fa, ga, float(ga @ d) if np.all(np.isfinite(ga)) else math.nan

        alpha, f_new, g_new, ok = _line_search(phi, f, d0, a1, cfg, counter, a_max)
        if ok and cfg.polish_step and counter.n < cfg.max_evals:
            alpha, f_new, g_new = _polish(phi, f, d0, alpha, f_new, g_new, d, cfg, a_max)
        if not ok:
            status = "max_evals" if counter.n >= cfg.max_evals else "line_search_failed"
            break
        s = alpha * d
        y = g_new - g
        x = x + s
        f_old = f
        f, g = f_new, g_new
        it += 1
        history.append(f)
        if callback is not None:
            callback(x, f)
        if y @ s > 1e-12 * float(np.linalg.norm(y) * np.linalg.norm(s)):
            S.append(s)
            Y.append(y)
            if len(S) > cfg.memory:
                S.pop(0)
                Y.pop(0)
        if cfg.f_tolerance > 0 and len(history) > cfg.past:
            ref = history[-1 - cfg.past]
            if (ref - f) <= cfg.f_tolerance * max(abs(ref), abs(f), 1.0):
                status = "stalled"
                break
        if f_old - f == 0.0 and float(np.max(np.abs(s))) == 0.0:
            status = "line_search_failed"
            break
    gn = float(np.max(np.abs(g))) if g.size else 0.0
    return LbfgsResult(x, f, status, it, counter.n, gn, history)


def _polish(phi, f0, d0, alpha, fa, ga, d, cfg: LbfgsConfig, a_max: float = math.inf):
    """One interpolation probe from the accepted step; exact on quadratics.
    Kept only if it is also a strong-Wolfe point with a lower value."""
    da = float(ga @ d)
    t = _cubic_min(0.0, f0, d0, alpha, fa, da)
    if t is None or not (0.0 < t <= a_max) or abs(t - alpha) <= 1e-3 * alpha or t > 4.0 * alpha:
        return alpha, fa, ga
    ft, gt, dt = phi(t)
    if (math.isfinite(ft) and ft < fa and ft <= f0 + cfg.c1 * t * d0
            and abs(dt) <= -cfg.c2 * d0):
        return t, ft, gt
    return alpha, fa, ga
