"""Compiled inner loops for the stage integrators."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

EULER, HEUN, RK4, SSPRK3 = 0, 1, 2, 3
NOISE_LINEAR, NOISE_SMOOTH, NOISE_ZERO = 0, 1, 2


@njit(cache=True)
def _poly_eval(x, edges, coeffs, degrees, hint):
    """Clamped piecewise Chebyshev evaluation; ``hint`` caches the piece index."""
    npieces = edges.shape[0] - 1
    if x <= edges[0]:
        x = edges[0]
    elif x >= edges[npieces]:
        x = edges[npieces]
    k = hint[0]
    if not (edges[k] <= x and (x < edges[k + 1] or k == npieces - 1)):
        lo, hi = 0, npieces
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if edges[mid] <= x:
                lo = mid
            else:
                hi = mid
        k = lo
        hint[0] = k
    a = edges[k]
    b = edges[k + 1]
    u = (2.0 * x - a - b) / (b - a)
    if u > 1.0:
        u = 1.0
    elif u < -1.0:
        u = -1.0
    d = degrees[k]
    b1 = 0.0
    b2 = 0.0
    for j in range(d, 0, -1):
        tmp = coeffs[k, j] + 2.0 * u * b1 - b2
        b2 = b1
        b1 = tmp
    return coeffs[k, 0] + u * b1 - b2


@njit(cache=True)
def _noise(t, k, ntimes, nvalues, mode, alpha, beta, sign):
    """omega(t) for t inside noise interval k (mode 0) or by formula."""
    if mode == NOISE_ZERO:
        return 0.0
    if mode == NOISE_SMOOTH:
        if t <= 0.0:
            return 0.0
        return sign * (alpha * t + t ** (2.0 + beta) * math.sin(1.0 / t))
    t0 = ntimes[k]
    t1 = ntimes[k + 1]
    w = (t - t0) / (t1 - t0)
    return nvalues[k] + w * (nvalues[k + 1] - nvalues[k])


@njit(cache=True)
def _advance(k, t, ntimes):
    last = ntimes.shape[0] - 2
    while k < last and t > ntimes[k + 1]:
        k += 1
    return k


@njit(cache=True)
def integrate(times, y0, substeps, method, edges, coeffs, degrees, ntimes, nvalues, mode, alpha, beta, sign):
    """Solve y' = p(y + omega_t) on ``times``; returns y at every time.

    Each grid interval is split into ``substeps`` equal sub-steps. Sampled
    noise is interpolated linearly; RK4 keeps its order when every noise
    node is also a solution grid node.
    """
    n = times.shape[0]
    y = np.empty(n)
    y[0] = y0
    hint = np.zeros(1, dtype=np.int64)
    k = 0
    cur = y0
    for i in range(n - 1):
        h = (times[i + 1] - times[i]) / substeps
        for s in range(substeps):
            t = times[i] + s * h
            if s == substeps - 1:
                h = times[i + 1] - t
            tm = t + 0.5 * h
            te = t + h
            if method == EULER:
                k = _advance(k, t, ntimes)
                w0 = _noise(t, k, ntimes, nvalues, mode, alpha, beta, sign)
                cur = cur + h * _poly_eval(cur + w0, edges, coeffs, degrees, hint)
            elif method == HEUN:
                k = _advance(k, t, ntimes)
                w0 = _noise(t, k, ntimes, nvalues, mode, alpha, beta, sign)
                k = _advance(k, te, ntimes)
                w1 = _noise(te, k, ntimes, nvalues, mode, alpha, beta, sign)
                k1 = _poly_eval(cur + w0, edges, coeffs, degrees, hint)
                k2 = _poly_eval(cur + h * k1 + w1, edges, coeffs, degrees, hint)
                cur = cur + 0.5 * h * (k1 + k2)
            elif method == SSPRK3:
                # convex combination of Euler steps: order preserving when h * Lip <= 1
                k = _advance(k, t, ntimes)
                w0 = _noise(t, k, ntimes, nvalues, mode, alpha, beta, sign)
                k = _advance(k, te, ntimes)
                w1 = _noise(te, k, ntimes, nvalues, mode, alpha, beta, sign)
                k = _advance(k, tm, ntimes)
                wm = _noise(tm, k, ntimes, nvalues, mode, alpha, beta, sign)
                u1 = cur + h * _poly_eval(cur + w0, edges, coeffs, degrees, hint)
                u2 = 0.75 * cur + 0.25 * (u1 + h * _poly_eval(u1 + w1, edges, coeffs, degrees, hint))
                cur = cur / 3.0 + (2.0 / 3.0) * (u2 + h * _poly_eval(u2 + wm, edges, coeffs, degrees, hint))
            else:
                k = _advance(k, t, ntimes)
                w0 = _noise(t, k, ntimes, nvalues, mode, alpha, beta, sign)
                k = _advance(k, tm, ntimes)
                wm = _noise(tm, k, ntimes, nvalues, mode, alpha, beta, sign)
                k = _advance(k, te, ntimes)
                w1 = _noise(te, k, ntimes, nvalues, mode, alpha, beta, sign)
                k1 = _poly_eval(cur + w0, edges, coeffs, degrees, hint)
                k2 = _poly_eval(cur + 0.5 * h * k1 + wm, edges, coeffs, degrees, hint)
                k3 = _poly_eval(cur + 0.5 * h * k2 + wm, edges, coeffs, degrees, hint)
                k4 = _poly_eval(cur + h * k3 + w1, edges, coeffs, degrees, hint)
                cur = cur + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        y[i + 1] = cur
    return y


@njit(cache=True)
def poly_eval_many(xs, edges, coeffs, degrees):
    out = np.empty(xs.shape[0])
    hint = np.zeros(1, dtype=np.int64)
    for i in range(xs.shape[0]):
        out[i] = _poly_eval(xs[i], edges, coeffs, degrees, hint)
    return out


@njit(cache=True)
def _power_eval(x, breaks, coeffs, degrees):
    """Piecewise power-basis polynomial; piece k covers [breaks[k-1], breaks[k])."""
    k = 0
    while k < breaks.shape[0] and x >= breaks[k]:
        k += 1
    acc = 0.0
    for j in range(degrees[k], -1, -1):
        acc = acc * x + coeffs[k, j]
    return acc


@njit(cache=True)
def integrate_power_rk4(times, y0, breaks, coeffs, degrees, ntimes, nvalues, mode, alpha, beta, sign):
    """Classical RK4 for y' = b(y + omega_t) with b an exact piecewise polynomial."""
    n = times.shape[0]
    y = np.empty(n)
    y[0] = y0
    k = 0
    cur = y0
    for i in range(n - 1):
        t = times[i]
        h = times[i + 1] - t
        tm = t + 0.5 * h
        te = times[i + 1]
        k = _advance(k, t, ntimes)
        w0 = _noise(t, k, ntimes, nvalues, mode, alpha, beta, sign)
        k = _advance(k, tm, ntimes)
        wm = _noise(tm, k, ntimes, nvalues, mode, alpha, beta, sign)
        k = _advance(k, te, ntimes)
        w1 = _noise(te, k, ntimes, nvalues, mode, alpha, beta, sign)
        k1 = _power_eval(cur + w0, breaks, coeffs, degrees)
        k2 = _power_eval(cur + 0.5 * h * k1 + wm, breaks, coeffs, degrees)
        k3 = _power_eval(cur + 0.5 * h * k2 + wm, breaks, coeffs, degrees)
        k4 = _power_eval(cur + h * k3 + w1, breaks, coeffs, degrees)
        cur = cur + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        y[i + 1] = cur
    return y
