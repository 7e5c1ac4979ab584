"""Compiled shooting kernels for ``u'' = g(r) u`` on a uniform grid.

``g`` holds ``eps + 2 phi`` at the grid points.  Outward runs start from
``u(0) = 0, u'(0) = 1``; inward runs start from ``u(r_max) = 0``.  Values are
rescaled on the fly when they approach overflow, which never changes sign
patterns.
"""

import numpy as np
from numba import njit

_BIG = 1e150
_SHRINK = 1e-150


@njit(cache=True)
def midpoint_values(g):
    """Cubic interpolation of ``g`` at half steps (linear at the two edges)."""
    n = g.size
    out = np.empty(n - 1)
    for i in range(n - 1):
        if i == 0 or i == n - 2:
            out[i] = 0.5 * (g[i] + g[i + 1])
        else:
            out[i] = (-g[i - 1] + 9.0 * g[i] + 9.0 * g[i + 1] - g[i + 2]) / 16.0
    return out


@njit(cache=True)
def _numerov_first(g0, h):
    # series u = r (1 + g0 r^2 / 6 + ...)
    return h * (1.0 + g0 * h * h / 6.0)


@njit(cache=True)
def numerov_count(g, h):
    """Sign changes of the outward Numerov solution over ``(0, r_max]``."""
    n = g.size
    c = h * h / 12.0
    u_prev = 0.0
    u_cur = _numerov_first(g[0], h)
    nodes = 0
    for i in range(1, n - 1):
        u_next = (2.0 * u_cur * (1.0 + 5.0 * c * g[i]) - u_prev * (1.0 - c * g[i - 1])) / (
            1.0 - c * g[i + 1]
        )
        if u_next * u_cur < 0.0 or (u_cur == 0.0 and u_next * u_prev < 0.0):
            nodes += 1
        if abs(u_next) > _BIG:
            u_next *= _SHRINK
            u_cur *= _SHRINK
        u_prev = u_cur
        u_cur = u_next
    return nodes


@njit(cache=True)
def numerov_outward(g, h, stop):
    """Outward Numerov solution on indices ``0..stop`` (inclusive)."""
    u = np.zeros(stop + 1)
    c = h * h / 12.0
    u[1] = _numerov_first(g[0], h)
    for i in range(1, stop):
        u[i + 1] = (2.0 * u[i] * (1.0 + 5.0 * c * g[i]) - u[i - 1] * (1.0 - c * g[i - 1])) / (
            1.0 - c * g[i + 1]
        )
        if abs(u[i + 1]) > _BIG:
            for j in range(i + 2):
                u[j] *= _SHRINK
    return u


@njit(cache=True)
def numerov_inward(g, h, stop):
    """Inward Numerov solution on indices ``stop..N-1``; ``u[N-1] = 0``."""
    n = g.size
    u = np.zeros(n)
    c = h * h / 12.0
    u[n - 2] = h
    for i in range(n - 2, stop, -1):
        u[i - 1] = (2.0 * u[i] * (1.0 + 5.0 * c * g[i]) - u[i + 1] * (1.0 - c * g[i + 1])) / (
            1.0 - c * g[i - 1]
        )
        if abs(u[i - 1]) > _BIG:
            for j in range(i - 1, n):
                u[j] *= _SHRINK
    return u


@njit(cache=True)
def _rk4_step(u, p, h, ga, gm, gb):
    k1u = p
    k1p = ga * u
    k2u = p + 0.5 * h * k1p
    k2p = gm * (u + 0.5 * h * k1u)
    k3u = p + 0.5 * h * k2p
    k3p = gm * (u + 0.5 * h * k2u)
    k4u = p + h * k3p
    k4p = gb * (u + h * k3u)
    u_new = u + h * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
    p_new = p + h * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0
    return u_new, p_new


@njit(cache=True)
def rk4_count(g, gm, h):
    n = g.size
    u = 0.0
    p = 1.0
    nodes = 0
    for i in range(n - 1):
        u_new, p_new = _rk4_step(u, p, h, g[i], gm[i], g[i + 1])
        if u_new * u < 0.0:
            nodes += 1
        if abs(u_new) > _BIG or abs(p_new) > _BIG:
            u_new *= _SHRINK
            p_new *= _SHRINK
        u = u_new
        p = p_new
    return nodes


@njit(cache=True)
def rk4_outward(g, gm, h, stop):
    u = np.zeros(stop + 1)
    p = 1.0
    for i in range(stop):
        u[i + 1], p = _rk4_step(u[i], p, h, g[i], gm[i], g[i + 1])
        if abs(u[i + 1]) > _BIG or abs(p) > _BIG:
            p *= _SHRINK
            for j in range(i + 2):
                u[j] *= _SHRINK
    return u


@njit(cache=True)
def rk4_inward(g, gm, h, stop):
    n = g.size
    u = np.zeros(n)
    p = -1.0
    for i in range(n - 1, stop, -1):
        u[i - 1], p = _rk4_step(u[i], p, -h, g[i], gm[i - 1], g[i - 1])
        if abs(u[i - 1]) > _BIG or abs(p) > _BIG:
            p *= _SHRINK
            for j in range(i - 1, n):
                u[j] *= _SHRINK
    return u
