"""Compiled coordinate-descent sweeps for ``b'Qb - 2c'b + 2*h*|b|_1``.

``h`` is half the l1 weight. The gradient ``g = c - Q b`` is updated in place
as coordinates move.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def soft_threshold(u, h):
    if u > h:
        return u - h
    if u < -h:
        return u + h
    return 0.0


@njit(cache=True)
def cd_sweeps(Q, c, h, beta, g, yy, max_sweeps, tol, trace, full_every):
    """Run at most ``max_sweeps`` sweeps.

    Every ``full_every``-th sweep visits all coordinates, the others only the
    current non-zeros. Returns ``(sweeps_done, converged)`` where converged
    means a full sweep moved no coordinate by more than ``tol * (1 + |b|_inf)``.
    ``trace[k]`` receives the objective after sweep ``k``.
    """
    p = beta.shape[0]
    full = True
    since_full = 0
    for it in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            bj = beta[j]
            if not full and bj == 0.0:
                continue
            qjj = Q[j, j]
            if qjj <= 0.0:
                continue
            new = soft_threshold(g[j] + qjj * bj, h) / qjj
            delta = new - bj
            if delta != 0.0:
                beta[j] = new
                for k in range(p):
                    g[k] -= Q[k, j] * delta
                ad = abs(delta)
                if ad > max_delta:
                    max_delta = ad
        max_abs = 0.0
        obj = yy
        for k in range(p):
            b = beta[k]
            ab = abs(b)
            if ab > max_abs:
                max_abs = ab
            # b'Qb - 2c'b with Qb = c - g
            obj += 2.0 * h * ab - b * (c[k] + g[k])
        trace[it] = obj
        small = max_delta < tol * (1.0 + max_abs)
        if full and small:
            return it + 1, True
        if small:
            full = True
            since_full = 0
        else:
            since_full += 1
            full = since_full >= full_every
            if full:
                since_full = 0
    return max_sweeps, False
