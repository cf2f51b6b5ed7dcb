"""Compiled inner loops.

Everything hot lives here as numba kernels operating on flat arrays:

* shapes are encoded as ``(kinds, params, verts, offsets)``; kind 0 is a disk
  with ``params[k] = (cx, cy, r0, r1)`` and radius ``r0 + r1 * s``, kind 1 is a
  polygon whose CCW vertices are ``verts[offsets[k]:offsets[k + 1]]``;
* motions are piecewise quintics ``coeffs[i, j, dim]`` over local segment time
  with absolute breakpoints ``breaks``; dims are (x, y, yaw).

The public wrappers in :mod:`sweptsdf.geometry`, :mod:`sweptsdf.sweep` and
:mod:`sweptsdf.svsdf` own validation and the object model.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

GOLDEN = 0.6180339887498949
GOLDEN_ANGLE = 2.399963229728653  # 2*pi*(1 - 1/phi)
TWO_PI = 2.0 * math.pi

KIND_DISK = 0
KIND_POLYGON = 1

STATUS_EXTERIOR = 0
STATUS_INTERIOR = 1
STATUS_BOUNDARY = 2
STATUS_BOUND_ONLY = 3
STATUS_NONCONVERGED = -1
STATUS_NEGATIVE_RADIUS = -2


# ---------------------------------------------------------------------------
# shape SDF
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def polygon_sdf(verts, a, b, x, y):
    n = b - a
    best = np.inf
    bx = 0.0
    by = 0.0
    nxo = 1.0
    nyo = 0.0
    inside = False
    for i in range(n):
        v0x = verts[a + i, 0]
        v0y = verts[a + i, 1]
        j = a + (i + 1) % n
        v1x = verts[j, 0]
        v1y = verts[j, 1]
        ex = v1x - v0x
        ey = v1y - v0y
        wx = x - v0x
        wy = y - v0y
        ee = ex * ex + ey * ey
        t = (wx * ex + wy * ey) / ee
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        dx = wx - ex * t
        dy = wy - ey * t
        d2 = dx * dx + dy * dy
        if d2 < best:
            best = d2
            bx = dx
            by = dy
            el = math.sqrt(ee)
            nxo = ey / el
            nyo = -ex / el
        if (v0y > y) != (v1y > y):
            xint = v0x + (y - v0y) * ex / ey
            if x < xint:
                inside = not inside
    dist = math.sqrt(best)
    sign = -1.0 if inside else 1.0
    if dist > 1e-14:
        return sign * dist, sign * bx / dist, sign * by / dist
    return 0.0, nxo, nyo


@njit(cache=True, nogil=True)
def shape_sdf(kinds, params, verts, offsets, x, y, s):
    """Return (sdf, grad_x, grad_y, d sdf / d shape_time)."""
    best = np.inf
    gx = 1.0
    gy = 0.0
    gs = 0.0
    for k in range(kinds.shape[0]):
        if kinds[k] == KIND_DISK:
            dx = x - params[k, 0]
            dy = y - params[k, 1]
            nrm = math.sqrt(dx * dx + dy * dy)
            d = nrm - (params[k, 2] + params[k, 3] * s)
            if nrm > 0.0:
                ux = dx / nrm
                uy = dy / nrm
            else:
                ux = 1.0
                uy = 0.0
            us = -params[k, 3]
        else:
            d, ux, uy = polygon_sdf(verts, offsets[k], offsets[k + 1], x, y)
            us = 0.0
        if d < best:
            best = d
            gx = ux
            gy = uy
            gs = us
    return best, gx, gy, gs


@njit(cache=True, nogil=True)
def shape_sdf_batch(kinds, params, verts, offsets, pts, s):
    n = pts.shape[0]
    out = np.empty((n, 3))
    for i in range(n):
        d, gx, gy, _ = shape_sdf(kinds, params, verts, offsets, pts[i, 0], pts[i, 1], s)
        out[i, 0] = d
        out[i, 1] = gx
        out[i, 2] = gy
    return out


# ---------------------------------------------------------------------------
# piecewise polynomial motion
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def find_segment(breaks, t):
    n = breaks.shape[0] - 1
    if t <= breaks[0]:
        return 0
    if t >= breaks[n]:
        return n - 1
    lo = 0
    hi = n - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if breaks[mid] <= t:
            lo = mid
        else:
            hi = mid - 1
    return lo


@njit(cache=True, nogil=True)
def poly_deriv(coeffs, i, dim, tau, order):
    deg = coeffs.shape[1] - 1
    acc = 0.0
    for k in range(deg, order - 1, -1):
        f = 1.0
        for m in range(order):
            f *= k - m
        acc = acc * tau + f * coeffs[i, k, dim]
    return acc


@njit(cache=True, nogil=True)
def pose_and_rate(coeffs, breaks, t):
    i = find_segment(breaks, t)
    tau = t - breaks[i]
    x = 0.0
    y = 0.0
    yaw = 0.0
    vx = 0.0
    vy = 0.0
    w = 0.0
    for k in range(coeffs.shape[1] - 1, -1, -1):
        x = x * tau + coeffs[i, k, 0]
        y = y * tau + coeffs[i, k, 1]
        yaw = yaw * tau + coeffs[i, k, 2]
    for k in range(coeffs.shape[1] - 1, 0, -1):
        vx = vx * tau + k * coeffs[i, k, 0]
        vy = vy * tau + k * coeffs[i, k, 1]
        w = w * tau + k * coeffs[i, k, 2]
    return x, y, yaw, vx, vy, w


@njit(cache=True, nogil=True)
def sample_poses(coeffs, breaks, ts):
    n = ts.shape[0]
    out = np.empty((n, 3))
    for j in range(n):
        x, y, yaw, _, _, _ = pose_and_rate(coeffs, breaks, ts[j])
        out[j, 0] = x
        out[j, 1] = y
        out[j, 2] = yaw
    return out


@njit(cache=True, nogil=True)
def rate_bounds(coeffs, breaks, per_segment):
    """Sampled max of translational speed and |yaw rate|, padded by the
    sampled max of the next derivative times half the sampling step."""
    vmax = 0.0
    wmax = 0.0
    amax = 0.0
    alpha_max = 0.0
    dtmax = 0.0
    for i in range(breaks.shape[0] - 1):
        T = breaks[i + 1] - breaks[i]
        dt = T / per_segment
        if dt > dtmax:
            dtmax = dt
        for j in range(per_segment + 1):
            tau = j * dt
            vx = poly_deriv(coeffs, i, 0, tau, 1)
            vy = poly_deriv(coeffs, i, 1, tau, 1)
            w = abs(poly_deriv(coeffs, i, 2, tau, 1))
            ax = poly_deriv(coeffs, i, 0, tau, 2)
            ay = poly_deriv(coeffs, i, 1, tau, 2)
            al = abs(poly_deriv(coeffs, i, 2, tau, 2))
            v = math.sqrt(vx * vx + vy * vy)
            a = math.sqrt(ax * ax + ay * ay)
            if v > vmax:
                vmax = v
            if w > wmax:
                wmax = w
            if a > amax:
                amax = a
            if al > alpha_max:
                alpha_max = al
    return vmax + 0.5 * amax * dtmax, wmax + 0.5 * alpha_max * dtmax


# ---------------------------------------------------------------------------
# conservative metric g(p) = min_t sdf(T^-1(t) p)
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def body_distance(kinds, params, verts, offsets, coeffs, breaks, t0, span, px, py, t):
    """sdf of p in the body frame at time t, its time derivative, and |p - c(t)|."""
    x, y, yaw, vx, vy, w = pose_and_rate(coeffs, breaks, t)
    c = math.cos(yaw)
    s = math.sin(yaw)
    wx = px - x
    wy = py - y
    lx = c * wx + s * wy
    ly = -s * wx + c * wy
    st = (t - t0) / span if span > 0.0 else 0.0
    d, gx, gy, gs = shape_sdf(kinds, params, verts, offsets, lx, ly, st)
    dlx = w * ly - (c * vx + s * vy)
    dly = -w * lx - (-s * vx + c * vy)
    dd = gx * dlx + gy * dly
    if span > 0.0:
        dd += gs / span
    return d, dd, math.sqrt(wx * wx + wy * wy)


@njit(cache=True, nogil=True)
def _better(v, t, best, tbest):
    return v < best or (v == best and t < tbest)


@njit(cache=True, nogil=True)
def _leaf_search(kinds, params, verts, offsets, coeffs, breaks, t0, span, px, py,
                 a, b, fa, fb, da, db, tol, best, tbest):
    """Local minimum of d on a leaf [a, b] given endpoint values and slopes.

    A leaf is assumed to hold at most one stationary point. When the slope
    changes sign from - to + the minimizer is bracketed and located by
    Illinois regula falsi on the slope (bisection fallback); otherwise the
    leaf minimum sits at an endpoint, which the caller already recorded.
    """
    if not (da < 0.0 and db > 0.0):
        return best, tbest
    side = 0
    while b - a > tol:
        m = (a * db - b * da) / (db - da)
        lo = a + 0.05 * (b - a)
        hi = b - 0.05 * (b - a)
        if not (lo <= m <= hi):
            m = 0.5 * (a + b)
        fm, dm, _ = body_distance(kinds, params, verts, offsets, coeffs, breaks, t0, span, px, py, m)
        if _better(fm, m, best, tbest):
            best = fm
            tbest = m
        if dm == 0.0:
            break
        if dm > 0.0:
            b = m
            db = dm
            if side == 1:
                da *= 0.5
            side = 1
        else:
            a = m
            da = dm
            if side == -1:
                db *= 0.5
            side = -1
    return best, tbest


@njit(cache=True, nogil=True)
def metric(kinds, params, verts, offsets, radius, coeffs, breaks, ct, cx, cy,
           vmax, wmax, rdot, tol, prune, px, py, cutoff):
    """Global min over t of the body-frame sdf at p.

    Coarse bounding-circle pruning followed by Lipschitz branch-and-bound
    down to quarter-interval leaves, each refined by a 1D local search.
    Returns (g, t_star, local_x, local_y, grad_x, grad_y).

    As soon as some time gives a distance below ``cutoff`` the search stops
    and returns that (non-minimal) value, which is then only an upper bound
    on g. Pass -inf for the exact minimum.
    """
    n = ct.shape[0] - 1
    t0 = ct[0]
    span = ct[n] - t0
    best = np.inf
    tbest = t0
    if n >= 1 and span > 0.0:
        dp = np.empty(n + 1)
        min_b = np.inf
        jmin = 0
        for j in range(n + 1):
            dp[j] = math.sqrt((px - cx[j]) ** 2 + (py - cy[j]) ** 2) - radius
            if dp[j] + 2.0 * radius < min_b:
                min_b = dp[j] + 2.0 * radius
                jmin = j
        d, dd, r = body_distance(kinds, params, verts, offsets, coeffs, breaks, t0, span,
                                 px, py, ct[jmin])
        best = d
        tbest = ct[jmin]
        # a first sample under the cutoff settles the query without any scratch space
        if best >= cutoff:
            fv = np.full(n + 1, np.nan)
            dv = np.empty(n + 1)
            rv = np.empty(n + 1)
            fv[jmin] = d
            dv[jmin] = dd
            rv[jmin] = r
            cap = 4 * (n + 1) + 64
            sa = np.empty(cap)
            sb = np.empty(cap)
            sfa = np.empty(cap)
            sfb = np.empty(cap)
            sda = np.empty(cap)
            sdb = np.empty(cap)
            sra = np.empty(cap)
            srb = np.empty(cap)
            top = 0
            leaf = 0.25 * span / n * 1.000001
            for jj in range(n):
                j = n - 1 - jj
                w = ct[j + 1] - ct[j]
                if prune and 0.5 * (dp[j] + dp[j + 1] - vmax * w) > min_b:
                    continue
                for k in (j, j + 1):
                    if np.isnan(fv[k]):
                        d, dd, r = body_distance(kinds, params, verts, offsets, coeffs, breaks, t0,
                                                 span, px, py, ct[k])
                        fv[k] = d
                        dv[k] = dd
                        rv[k] = r
                        if _better(d, ct[k], best, tbest):
                            best = d
                            tbest = ct[k]
                sa[top] = ct[j]
                sb[top] = ct[j + 1]
                sfa[top] = fv[j]
                sfb[top] = fv[j + 1]
                sda[top] = dv[j]
                sdb[top] = dv[j + 1]
                sra[top] = rv[j]
                srb[top] = rv[j + 1]
                top += 1
                if best < cutoff:
                    top = 0
                    break
            while top > 0:
                top -= 1
                a = sa[top]
                b = sb[top]
                fa = sfa[top]
                fb = sfb[top]
                w = b - a
                if prune:
                    lip = vmax + wmax * (max(sra[top], srb[top]) + 0.5 * vmax * w) + rdot
                    if 0.5 * (fa + fb - lip * w) > best:
                        continue
                if w <= leaf or top + 2 >= cap:
                    best, tbest = _leaf_search(kinds, params, verts, offsets, coeffs, breaks, t0, span,
                                               px, py, a, b, fa, fb, sda[top], sdb[top], tol, best, tbest)
                    if best < cutoff:
                        break
                    continue
                m = 0.5 * (a + b)
                fm, dm, rm = body_distance(kinds, params, verts, offsets, coeffs, breaks, t0, span, px, py, m)
                if _better(fm, m, best, tbest):
                    best = fm
                    tbest = m
                    if best < cutoff:
                        break
                # right half first on the stack so the left half is searched next
                sa[top + 1] = a
                sb[top + 1] = m
                sfa[top + 1] = fa
                sfb[top + 1] = fm
                sda[top + 1] = sda[top]
                sdb[top + 1] = dm
                sra[top + 1] = sra[top]
                srb[top + 1] = rm
                sa[top] = m
                sfa[top] = fm
                sda[top] = dm
                sra[top] = rm
                top += 2
    x, y, yaw, _, _, _ = pose_and_rate(coeffs, breaks, tbest)
    c = math.cos(yaw)
    s = math.sin(yaw)
    wx = px - x
    wy = py - y
    lx = c * wx + s * wy
    ly = -s * wx + c * wy
    st = (tbest - t0) / span if span > 0.0 else 0.0
    g, gx, gy, _ = shape_sdf(kinds, params, verts, offsets, lx, ly, st)
    return g, tbest, lx, ly, c * gx - s * gy, s * gx + c * gy


@njit(cache=True, nogil=True)
def metric_batch(kinds, params, verts, offsets, radius, coeffs, breaks, ct, cx, cy,
                 vmax, wmax, rdot, tol, prune, pts):
    n = pts.shape[0]
    out = np.empty((n, 6))
    for i in range(n):
        g, ts, lx, ly, gx, gy = metric(kinds, params, verts, offsets, radius, coeffs, breaks, ct, cx, cy,
                                       vmax, wmax, rdot, tol, prune, pts[i, 0], pts[i, 1], -np.inf)
        out[i, 0] = g
        out[i, 1] = ts
        out[i, 2] = lx
        out[i, 3] = ly
        out[i, 4] = gx
        out[i, 5] = gy
    return out


# ---------------------------------------------------------------------------
# GSIP: interior swept-volume distance by shrinking tangent balls
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def gsip(kinds, params, verts, offsets, radius, coeffs, breaks, ct, cx, cy,
         vmax, wmax, rdot, tol, px, py, r0, eps, n_ang, n_rad, refine_steps, refine_top,
         max_iter, seeds, hist_r, hist_g, hist_q):
    """Returns (status, value, t_star, qx, qy, grad_x, grad_y, iterations, bound).

    ``seeds`` (m, 2) are extra first-iteration candidates for the ball
    maximum (projected into the ball), typically the maximizers of finished
    neighbouring queries; they are added to the ring samples, not used
    instead of them.

    hist_r/hist_g/hist_q receive the radius r_k, the lower-level maximum g*_k
    and the point where it was attained, for every iteration. ``bound`` is the tightest certified signed value for
    seeding neighbours: g(p) outside, -(r_K - max(g*_K, 0)) inside. The
    max of g over a ball of radius r around an interior p is at most
    r - depth, so r_K - g*_K still bounds the depth from above.
    """
    g, ts, _, _, gx, gy = metric(kinds, params, verts, offsets, radius, coeffs, breaks, ct, cx, cy,
                                 vmax, wmax, rdot, tol, True, px, py, -np.inf)
    if g > 0.0:
        return STATUS_EXTERIOR, g, ts, px, py, gx, gy, 0, g
    if g == 0.0:
        return STATUS_BOUNDARY, 0.0, ts, px, py, gx, gy, 0, 0.0
    ntop = min(refine_top, n_ang * n_rad)
    top_g = np.empty(ntop)
    top_x = np.empty(ntop)
    top_y = np.empty(ntop)
    top_a = np.empty(ntop)
    top_t = np.empty(ntop)
    top_gx = np.empty(ntop)
    top_gy = np.empty(ntop)
    r = r0
    for k in range(max_iter):
        hist_r[k] = r
        filled = 0
        offset = k * GOLDEN_ANGLE
        # seeds first (first iteration only), then the outer ring: both set a
        # high cutoff for the deeper samples
        ns = seeds.shape[0] if k == 0 else 0
        for c in range(ns + n_rad * n_ang):
            if c < ns:
                qx = seeds[c, 0]
                qy = seeds[c, 1]
                ddx = qx - px
                ddy = qy - py
                dn = math.sqrt(ddx * ddx + ddy * ddy)
                if dn > r:
                    qx = px + ddx * r / dn
                    qy = py + ddy * r / dn
                    dn = r
                alpha = dn / r
            else:
                alpha = (n_rad - (c - ns) // n_ang) / n_rad
                th = offset + TWO_PI * ((c - ns) % n_ang) / n_ang
                qx = px + alpha * r * math.cos(th)
                qy = py + alpha * r * math.sin(th)
            cut = top_g[ntop - 1] if filled == ntop else -np.inf
            gq, tq, _, _, gqx, gqy = metric(kinds, params, verts, offsets, radius, coeffs, breaks,
                                            ct, cx, cy, vmax, wmax, rdot, tol, True, qx, qy, cut)
            if filled < ntop:
                pos = filled
                filled += 1
            elif gq > top_g[ntop - 1]:
                pos = ntop - 1
            else:
                continue
            while pos > 0 and top_g[pos - 1] < gq:
                top_g[pos] = top_g[pos - 1]
                top_x[pos] = top_x[pos - 1]
                top_y[pos] = top_y[pos - 1]
                top_a[pos] = top_a[pos - 1]
                top_t[pos] = top_t[pos - 1]
                top_gx[pos] = top_gx[pos - 1]
                top_gy[pos] = top_gy[pos - 1]
                pos -= 1
            top_g[pos] = gq
            top_x[pos] = qx
            top_y[pos] = qy
            top_a[pos] = alpha
            top_t[pos] = tq
            top_gx[pos] = gqx
            top_gy[pos] = gqy
        best_g = -np.inf
        bx = px
        by = py
        bt = ts
        for m in range(filled):
            qx = top_x[m]
            qy = top_y[m]
            gq = top_g[m]
            tq = top_t[m]
            gqx = top_gx[m]
            gqy = top_gy[m]
            step0 = max((1.0 - top_a[m]) * r, r * TWO_PI / n_ang)
            step = step0
            for _ in range(refine_steps):
                ddx = qx - px
                ddy = qy - py
                dq = math.sqrt(ddx * ddx + ddy * ddy)
                if dq >= r * (1.0 - 1e-9) and gqx * ddx + gqy * ddy > 0.0:
                    # on the rim with g rising outward: only the tangential
                    # part of the gradient can help, so walk along the circle
                    ux = ddx / dq
                    uy = ddy / dq
                    gt = gqy * ux - gqx * uy
                    if abs(gt) <= 1e-12:
                        break  # KKT point on the rim
                    th = math.atan2(uy, ux) + step * gt / r
                    nx = px + r * math.cos(th)
                    ny = py + r * math.sin(th)
                else:
                    nx = qx + step * gqx
                    ny = qy + step * gqy
                    ddx = nx - px
                    ddy = ny - py
                    dn = math.sqrt(ddx * ddx + ddy * ddy)
                    if dn > r:
                        nx = px + ddx * r / dn
                        ny = py + ddy * r / dn
                if abs(nx - qx) + abs(ny - qy) <= 1e-12 * (r + 1.0):
                    break
                g2, t2, _, _, g2x, g2y = metric(kinds, params, verts, offsets, radius, coeffs, breaks,
                                                ct, cx, cy, vmax, wmax, rdot, tol, True, nx, ny, gq)
                if g2 > gq:
                    qx = nx
                    qy = ny
                    gq = g2
                    tq = t2
                    gqx = g2x
                    gqy = g2y
                    step = min(2.0 * step, 2.0 * step0)
                else:
                    step *= 0.5
            if gq > best_g:
                best_g = gq
                bx = qx
                by = qy
                bt = tq
        hist_g[k] = best_g
        hist_q[k, 0] = bx
        hist_q[k, 1] = by
        if best_g < eps:
            rf = -(r - max(best_g, 0.0))
            ddx = bx - px
            ddy = by - py
            dn = math.sqrt(ddx * ddx + ddy * ddy)
            if dn > 0.0:
                return STATUS_INTERIOR, -r, bt, bx, by, ddx / dn, ddy / dn, k + 1, rf
            return STATUS_INTERIOR, -r, bt, bx, by, gx, gy, k + 1, rf
        r = r - best_g
        if r < 0.0:
            return STATUS_NEGATIVE_RADIUS, -r, bt, bx, by, gx, gy, k + 1, 0.0
    return STATUS_NONCONVERGED, -r, ts, px, py, gx, gy, max_iter, 0.0


@njit(cache=True, nogil=True)
def gsip_grid(kinds, params, verts, offsets, radius, coeffs, breaks, ct, cx, cy,
              vmax, wmax, rdot, tol, ox, oy, h, nx, row0, row1, warm, r_default, eps,
              n_ang, n_rad, refine_steps, refine_top, max_iter, out):
    """Row-major sweep over rows [row0, row1); out[iy, ix] receives
    (value, t_star, qx, qy, grad_x, grad_y, iterations, status, bound).

    With ``warm`` each query starts from the smallest radius certified by an
    already finished neighbour n at distance d: depth(p) <= d - bound(n), and
    the ball maximizers of interior neighbours seed its first ball search.
    """
    hist_r = np.empty(max_iter)
    hist_g = np.empty(max_iter)
    hist_q = np.empty((max_iter, 2))
    seed_buf = np.empty((4, 2))
    diag = h * math.sqrt(2.0)
    for iy in range(row0, row1):
        for ix in range(nx):
            px = ox + (ix + 0.5) * h
            py = oy + (iy + 0.5) * h
            r0 = r_default
            ns = 0
            if warm:
                if ix > 0 and out[iy, ix - 1, 7] >= 0:
                    r0 = min(r0, h - out[iy, ix - 1, 8])
                    if out[iy, ix - 1, 7] == STATUS_INTERIOR:
                        seed_buf[ns, 0] = out[iy, ix - 1, 2]
                        seed_buf[ns, 1] = out[iy, ix - 1, 3]
                        ns += 1
                if iy > row0:
                    for jx in range(max(ix - 1, 0), min(ix + 2, nx)):
                        if out[iy - 1, jx, 7] >= 0:
                            dist = h if jx == ix else diag
                            r0 = min(r0, dist - out[iy - 1, jx, 8])
                            if out[iy - 1, jx, 7] == STATUS_INTERIOR:
                                seed_buf[ns, 0] = out[iy - 1, jx, 2]
                                seed_buf[ns, 1] = out[iy - 1, jx, 3]
                                ns += 1
                r0 = max(r0, 1e-12)
            res = gsip(kinds, params, verts, offsets, radius, coeffs, breaks,
                       ct, cx, cy, vmax, wmax, rdot, tol, px, py, r0, eps,
                       n_ang, n_rad, refine_steps, refine_top, max_iter, seed_buf[:ns], hist_r, hist_g, hist_q)
            out[iy, ix, 0] = res[1]
            out[iy, ix, 1] = res[2]
            out[iy, ix, 2] = res[3]
            out[iy, ix, 3] = res[4]
            out[iy, ix, 4] = res[5]
            out[iy, ix, 5] = res[6]
            out[iy, ix, 6] = res[7]
            out[iy, ix, 7] = res[0]
            out[iy, ix, 8] = res[8]


@njit(cache=True, nogil=True)
def gsip_batch(kinds, params, verts, offsets, radius, coeffs, breaks, ct, cx, cy,
               vmax, wmax, rdot, tol, pts, r_init, skip_above, eps,
               n_ang, n_rad, refine_steps, refine_top, max_iter):
    """Per-point queries with individual initial radii.

    Points whose bounding-circle lower bound exceeds ``skip_above`` are not
    solved: their row carries the bound and STATUS_BOUND_ONLY.
    """
    n = pts.shape[0]
    out = np.empty((n, 9))
    hist_r = np.empty(max_iter)
    hist_g = np.empty(max_iter)
    hist_q = np.empty((max_iter, 2))
    no_seeds = np.empty((0, 2))
    m = ct.shape[0]
    for i in range(n):
        px = pts[i, 0]
        py = pts[i, 1]
        lb = np.inf
        for j in range(m):
            dj = math.sqrt((px - cx[j]) ** 2 + (py - cy[j]) ** 2)
            if dj < lb:
                lb = dj
        if m > 1:
            lb -= 0.5 * vmax * (ct[m - 1] - ct[0]) / (m - 1)
        lb -= radius
        if lb > skip_above:
            out[i, 0] = lb
            out[i, 1] = ct[0]
            out[i, 2] = px
            out[i, 3] = py
            out[i, 4] = 0.0
            out[i, 5] = 0.0
            out[i, 6] = 0
            out[i, 7] = STATUS_BOUND_ONLY
            out[i, 8] = lb
            continue
        st, v, ts, qx, qy, gx, gy, it, bd = gsip(kinds, params, verts, offsets, radius, coeffs, breaks,
                                             ct, cx, cy, vmax, wmax, rdot, tol, px, py, r_init[i], eps,
                                             n_ang, n_rad, refine_steps, refine_top, max_iter,
                                             no_seeds, hist_r, hist_g, hist_q)
        out[i, 0] = v
        out[i, 1] = ts
        out[i, 2] = qx
        out[i, 3] = qy
        out[i, 4] = gx
        out[i, 5] = gy
        out[i, 6] = it
        out[i, 7] = st
        out[i, 8] = bd
    return out


# ---------------------------------------------------------------------------
# dense-sampling references
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def rasterize_sweep(kinds, params, verts, offsets, radius, coeffs, breaks, t0, t1, n_samples,
                    ox, oy, h, occ):
    ny, nx = occ.shape
    span = t1 - t0
    for k in range(n_samples):
        u = k / (n_samples - 1) if n_samples > 1 else 0.0
        t = t0 + span * u
        x, y, yaw, _, _, _ = pose_and_rate(coeffs, breaks, t)
        c = math.cos(yaw)
        s = math.sin(yaw)
        ix0 = max(0, int(math.floor((x - radius - ox) / h - 0.5)))
        ix1 = min(nx - 1, int(math.ceil((x + radius - ox) / h - 0.5)))
        iy0 = max(0, int(math.floor((y - radius - oy) / h - 0.5)))
        iy1 = min(ny - 1, int(math.ceil((y + radius - oy) / h - 0.5)))
        for iy in range(iy0, iy1 + 1):
            wy = oy + (iy + 0.5) * h - y
            for ix in range(ix0, ix1 + 1):
                if occ[iy, ix]:
                    continue
                wx = ox + (ix + 0.5) * h - x
                if wx * wx + wy * wy > radius * radius * (1.0 + 1e-12) + 1e-12:
                    continue
                lx = c * wx + s * wy
                ly = -s * wx + c * wy
                d, _, _, _ = shape_sdf(kinds, params, verts, offsets, lx, ly, u)
                if d <= 0.0:
                    occ[iy, ix] = True


@njit(cache=True, nogil=True)
def dense_min(kinds, params, verts, offsets, radius, coeffs, breaks, t0, t1, n_samples, pts):
    """min over n_samples uniform times of the body-frame sdf, per point.

    Returns rows (g, t). Samples whose bounding-circle bound cannot beat the
    running minimum are skipped.
    """
    span = t1 - t0
    ts = np.empty(n_samples)
    for k in range(n_samples):
        ts[k] = t0 + span * (k / (n_samples - 1) if n_samples > 1 else 0.0)
    poses = sample_poses(coeffs, breaks, ts)
    cs = np.cos(poses[:, 2])
    sn = np.sin(poses[:, 2])
    n = pts.shape[0]
    out = np.empty((n, 2))
    for i in range(n):
        px = pts[i, 0]
        py = pts[i, 1]
        best = np.inf
        tb = t0
        for k in range(n_samples):
            wx = px - poses[k, 0]
            wy = py - poses[k, 1]
            if math.sqrt(wx * wx + wy * wy) - radius >= best:
                continue
            lx = cs[k] * wx + sn[k] * wy
            ly = -sn[k] * wx + cs[k] * wy
            u = (ts[k] - t0) / span if span > 0.0 else 0.0
            d, _, _, _ = shape_sdf(kinds, params, verts, offsets, lx, ly, u)
            if d < best:
                best = d
                tb = ts[k]
        out[i, 0] = best
        out[i, 1] = tb
    return out
