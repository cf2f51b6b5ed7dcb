"""Time-sampled penalties on a trajectory with gradients wrt (coeffs, durations).

Each segment i is sampled at tau = (j / kappa) * T_i, j = 0..kappa, and a
sample contributes w * F(p, p', p'', p''') with the trapezoid weight
w = T_i / kappa (halved at the segment ends). Because the sample times scale
with T_i, d/dT_i picks up both the weight and the sample drift.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from ..optimizer import smoothed_l1
from ..traj import _FACT, PolyTrajectory


@dataclass(frozen=True)
class Samples:
    seg: NDArray[np.int64]
    frac: NDArray[np.float64]  # j / kappa
    trap: NDArray[np.float64]  # 1, or 1/2 at segment ends
    tau: NDArray[np.float64]
    t: NDArray[np.float64]  # absolute time
    weight: NDArray[np.float64]  # trap * T_i / kappa
    basis: NDArray[np.float64]  # (5, S, 6): derivative orders 0..4 of the monomials
    derivs: NDArray[np.float64]  # (5, S, m)
    kappa: int


def take_samples(traj: PolyTrajectory, kappa: int) -> Samples:
    N = traj.segments
    j = np.arange(kappa + 1)
    seg = np.repeat(np.arange(N), kappa + 1)
    frac = np.tile(j / kappa, N)
    trap = np.tile(np.where((j == 0) | (j == kappa), 0.5, 1.0), N)
    T = traj.durations[seg]
    tau = frac * T
    t = traj.breaks[seg] + tau
    pw = np.arange(6)
    basis = np.zeros((5, tau.size, 6))
    for k in range(5):
        e = np.maximum(pw - k, 0)
        basis[k] = np.where(pw >= k, tau[:, None] ** e, 0.0) * _FACT[k]
    derivs = np.einsum("kso,sod->ksd", basis, traj.coeffs[seg])
    return Samples(seg, frac, trap, tau, t, trap * T / kappa, basis, derivs, kappa)


# F(samples) -> (per-sample cost (S,), gradients wrt derivative orders 0..3: (4, S, m))
SampleCost = Callable[[Samples], tuple[NDArray[np.float64], NDArray[np.float64]]]


def accumulate(traj: PolyTrajectory, s: Samples, cost: SampleCost,
               weights: Optional[NDArray[np.float64]] = None):
    """Weighted sum of a sampled cost with dJ/dc (N, 6, m) and dJ/dT (N,).

    The default weights are the trapezoid rule in time. Fixed ``weights``
    (independent of T) turn the integral into a plain sum over sample slots.
    """
    F, dF = cost(s)
    N, m = traj.segments, traj.dims
    w = s.weight if weights is None else weights
    value = float(np.sum(w * F))
    # dc: sum over orders of w * basis_k(tau) outer dF_k
    contrib = np.einsum("s,kso,ksd->sod", w, s.basis[:4], dF)
    dc = np.zeros((N, 6, m))
    np.add.at(dc, s.seg, contrib)
    drift = np.einsum("ksd,ksd->s", dF, s.derivs[1:5])  # d/dtau of F
    dT = np.zeros(N)
    dw = s.trap / s.kappa * F if weights is None else 0.0
    np.add.at(dT, s.seg, dw + w * drift * s.frac)
    return value, dc, dT


def dynamics_cost(cfg) -> SampleCost:
    """Smoothed overshoot of |v|^2, |a|^2, |j|^2 over their limits, planar
    channels only."""
    limits = ((1, cfg.v_m, cfg.lambda_v), (2, cfg.a_m, cfg.lambda_a), (3, cfg.j_m, cfg.lambda_j))

    def cost(s: Samples):
        S, m = s.derivs.shape[1:]
        F = np.zeros(S)
        dF = np.zeros((4, S, m))
        for k, lim, lam in limits:
            if lam == 0:
                continue
            v = s.derivs[k, :, :2]
            x = np.sum(v * v, axis=1) - lim * lim
            val, d = smoothed_l1(x, cfg.mu)
            F += lam * val
            dF[k, :, :2] += (lam * d)[:, None] * 2.0 * v
        return F, dF

    return cost


def yaw_residual(dpsi):
    """||rot(d) - I||_F^2 = 4 (1 - cos d) and its derivative."""
    return 4.0 * (1.0 - np.cos(dpsi)), 4.0 * np.sin(dpsi)
