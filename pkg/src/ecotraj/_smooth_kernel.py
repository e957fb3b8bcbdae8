"""Compiled group smoothing; mirrors the scalar routines in ``smoothing`` operation for operation."""

from __future__ import annotations

import math

import numba
import numpy as np

SPEED_TOL = 1e-9


@numba.njit(cache=True)
def _dist(ax, ay, bx, by):
    return math.hypot(ax - bx, ay - by)


@numba.njit(cache=True)
def _toward(ox, oy, tx, ty, length):
    d = _dist(ox, oy, tx, ty)
    return ox + (tx - ox) * length / d, oy + (ty - oy) * length / d


@numba.njit(cache=True)
def _into_disk(px, py, cx, cy, radius):
    d = _dist(px, py, cx, cy)
    if d <= radius or d == 0.0:
        return px, py
    return _toward(cx, cy, px, py, radius)


@numba.njit(cache=True)
def _nearest_intersection(c1x, c1y, r1, c2x, c2y, r2, tx, ty):
    """Intersection of two circles nearest ``(tx, ty)``; ``ok`` is False if the centers coincide."""
    d = _dist(c1x, c1y, c2x, c2y)
    if d == 0.0:
        return False, 0.0, 0.0
    a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d)
    h2 = r1 * r1 - a * a
    h = math.sqrt(h2) if h2 > 0.0 else 0.0
    ux, uy = (c2x - c1x) / d, (c2y - c1y) / d
    mx, my = c1x + a * ux, c1y + a * uy
    if h == 0.0:
        return True, mx, my
    px, py = mx - h * uy, my + h * ux
    qx, qy = mx + h * uy, my - h * ux
    dp, dq = _dist(px, py, tx, ty), _dist(qx, qy, tx, ty)
    if dq < dp or (dq == dp and (qx < px or (qx == px and qy < py))):
        return True, qx, qy
    return True, px, py


@numba.njit(cache=True)
def preprocess_pivot(rx, ry, vx, vy, radius):
    if _dist(rx, ry, vx, vy) <= radius:
        return rx, ry
    px, py = _toward(vx, vy, rx, ry, radius)
    return _into_disk(px, py, vx, vy, radius)


@numba.njit(cache=True)
def preprocess_member(rx, ry, vx, vy, radius, sx, sy):
    if _dist(rx, ry, vx, vy) <= radius:
        return rx, ry
    c = _dist(sx, sy, vx, vy)
    target = min(max(_dist(rx, ry, sx, sy), max(0.0, c - radius)), c + radius)
    if target == 0.0:
        return sx, sy
    if c == 0.0:
        px, py = _toward(sx, sy, rx, ry, target)
        return _into_disk(px, py, vx, vy, radius)
    if rx == sx and ry == sy:
        dx, dy = vx, vy
    else:
        dx, dy = rx, ry
    px, py = _toward(sx, sy, dx, dy, target)
    if _dist(px, py, vx, vy) <= radius:
        return px, py
    ok, hx, hy = _nearest_intersection(sx, sy, target, vx, vy, radius, rx, ry)
    if not ok:
        return _into_disk(px, py, vx, vy, radius)
    return _into_disk(hx, hy, vx, vy, radius)


@numba.njit(cache=True)
def _cost(distance, b, delta, alpha):
    return (distance - b * delta) ** 2 + alpha * (delta * (b - 1.0)) ** 2


@numba.njit(cache=True)
def _consider(b, distance, delta, alpha, best_b, best_c):
    c = _cost(distance, b, delta, alpha)
    if c < best_c or (c == best_c and b < best_b):
        return b, c
    return best_b, best_c


@numba.njit(cache=True)
def solve(cx, cy, vx, vy, radius, sx, sy, delta, alpha):
    """Adjusted location and (snapshot, historical) cost of one speed-feasible object."""
    distance = _dist(cx, cy, sx, sy)
    if distance <= delta:
        return cx, cy, 0.0, 0.0
    c = _dist(sx, sy, vx, vy)
    lam1 = (c - radius) / delta
    lam2 = distance / delta
    lo = math.ceil(max(lam1, 1.0))
    hi = math.floor(lam2)

    best_b, best_c = lam2, _cost(distance, lam2, delta, alpha)
    if lo <= hi:
        vertex = (distance / delta + alpha) / (1.0 + alpha)
        for raw_b in (math.floor(vertex), math.ceil(vertex), lo, hi):
            b = float(min(max(raw_b, lo), hi))
            best_b, best_c = _consider(b, distance, delta, alpha, best_b, best_c)
    b_prime = best_b

    tol = 1e-9 * max(1.0, c + radius)
    feas_lo = max(0.0, c - radius) - tol
    feas_hi = c + radius + tol
    if feas_lo <= b_prime * delta <= feas_hi:
        b_opt = b_prime
    else:
        first = max(lo, math.ceil(feas_lo / delta))
        last = min(hi, math.floor(feas_hi / delta))
        b_opt = lam2
        gap = abs(lam2 - b_prime)
        for raw_b in (first, last, math.floor(b_prime), math.ceil(b_prime)):
            if first <= raw_b <= last:
                b = float(raw_b)
                if feas_lo <= b * delta <= feas_hi:
                    g = abs(b - b_prime)
                    if g < gap or (g == gap and b < b_opt):
                        b_opt, gap = b, g

    if b_opt == lam2:
        rx, ry = cx, cy
    else:
        ring = b_opt * delta
        rx, ry = _toward(sx, sy, cx, cy, ring)
        if _dist(rx, ry, vx, vy) > radius + SPEED_TOL:
            ok, hx, hy = _nearest_intersection(sx, sy, ring, vx, vy, radius, cx, cy)
            if ok:
                rx, ry = hx, hy
            rx, ry = _into_disk(rx, ry, vx, vy, radius)
    return rx, ry, _dist(rx, ry, cx, cy) ** 2, (delta * (b_opt - 1.0)) ** 2


@numba.njit(cache=True)
def _pivot_pass(p, cur, prev, radius, delta, alpha, cutoff, early_exit, out_r, out_src, out_sc, out_hc):
    m = cur.shape[0]
    sx, sy = preprocess_pivot(cur[p, 0], cur[p, 1], prev[p, 0], prev[p, 1], radius[p])
    out_r[p, 0], out_r[p, 1] = sx, sy
    out_src[p, 0], out_src[p, 1] = sx, sy
    out_sc[p] = 0.0
    out_hc[p] = 0.0
    total = 0.0
    for o in range(m):
        if o == p:
            continue
        bx, by = preprocess_member(cur[o, 0], cur[o, 1], prev[o, 0], prev[o, 1], radius[o], sx, sy)
        rx, ry, sc, hc = solve(bx, by, prev[o, 0], prev[o, 1], radius[o], sx, sy, delta, alpha)
        total += sc + alpha * hc
        if early_exit and total >= cutoff:
            return total, False
        out_r[o, 0], out_r[o, 1] = rx, ry
        out_src[o, 0], out_src[o, 1] = bx, by
        out_sc[o] = sc
        out_hc[o] = hc
    return total, True


@numba.njit(cache=True)
def smooth_group(cur, prev, radius, delta, alpha, early_exit):
    """Try every member as pivot (in row order); keep the cheapest, first on ties.

    Returns the pivot row, total cost, adjusted locations, solver start
    locations and per-member snapshot / historical costs.
    """
    m = cur.shape[0]
    best_r = np.empty((m, 2))
    best_src = np.empty((m, 2))
    best_sc = np.empty(m)
    best_hc = np.empty(m)
    r = np.empty((m, 2))
    src = np.empty((m, 2))
    sc = np.empty(m)
    hc = np.empty(m)
    best_p = -1
    best_cost = np.inf
    for p in range(m):
        total, complete = _pivot_pass(p, cur, prev, radius, delta, alpha, best_cost, early_exit, r, src, sc, hc)
        if complete and total < best_cost:
            best_cost = total
            best_p = p
            best_r[:] = r
            best_src[:] = src
            best_sc[:] = sc
            best_hc[:] = hc
    return best_p, best_cost, best_r, best_src, best_sc, best_hc


@numba.njit(cache=True)
def smooth_groups(cur, prev, radius, offsets, delta, alpha, early_exit):
    """``smooth_group`` over consecutive row blocks ``offsets[g]:offsets[g+1]``; pivots are global rows."""
    n_groups = offsets.shape[0] - 1
    n = cur.shape[0]
    pivots = np.empty(n_groups, dtype=np.int64)
    totals = np.empty(n_groups)
    r = np.empty((n, 2))
    src = np.empty((n, 2))
    sc = np.empty(n)
    hc = np.empty(n)
    for g in range(n_groups):
        a, b = offsets[g], offsets[g + 1]
        p, total, gr, gs, gsc, ghc = smooth_group(cur[a:b], prev[a:b], radius[a:b], delta, alpha, early_exit)
        pivots[g] = a + p
        totals[g] = total
        r[a:b] = gr
        src[a:b] = gs
        sc[a:b] = gsc
        hc[a:b] = ghc
    return pivots, totals, r, src, sc, hc
