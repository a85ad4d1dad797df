"""Compiled inner loops: Euler scheme and kernel-weighted path sums.

All loops accumulate left-to-right over the time index so results do not
depend on how work is scheduled by callers.
"""

import numpy as np
from numba import njit

from .kernels import KIND_POLY_BUMP, KIND_TRIANGULAR


@njit(cache=True, nogil=True, inline="always")
def _kernel_value(kind, params, u):
    if u < -0.5 or u > 0.5:
        return 0.0
    if kind == KIND_TRIANGULAR:
        return 2.0 - 4.0 * abs(u)
    if kind == KIND_POLY_BUMP:
        if abs(u) >= 0.5:
            return 0.0
        u2 = u * u
        p = 0.0
        for i in range(params.shape[0] - 1, -1, -1):
            p = p * u2 + params[i]
        return p * np.exp(-1.0 / (1.0 - 4.0 * u2))
    # dense table on a uniform grid over [-1/2, 1/2]
    m = params.shape[0]
    pos = (u + 0.5) * (m - 1)
    k = int(pos)
    if k < 0:
        k = 0
    if k > m - 2:
        k = m - 2
    w = pos - k
    return params[k] + w * (params[k + 1] - params[k])


@njit(cache=True, nogil=True)
def euler_path(x0, dt, noise, grid0, inv_dx, drift_values, blow_radius):
    """Euler recursion with tabulated drift (linear interpolation).

    Returns (path, blow_index); blow_index is -1 when the path stayed
    within ``blow_radius``, else the first offending step.
    """
    n = noise.shape[0]
    out = np.empty(n + 1)
    m = drift_values.shape[0]
    sq = np.sqrt(dt)
    x = x0
    out[0] = x
    for i in range(n):
        pos = (x - grid0) * inv_dx
        k = int(pos)
        if k < 0:
            k = 0
        if k > m - 2:
            k = m - 2
        w = pos - k
        b = drift_values[k] + w * (drift_values[k + 1] - drift_values[k])
        x = x + b * dt + sq * noise[i]
        out[i + 1] = x
        if x > blow_radius or x < -blow_radius:
            return out, i + 1
    return out, -1


@njit(cache=True, nogil=True)
def kernel_sums(samples, weights, x_grid, dx, kind, params, h):
    """``out[j] = sum_i K((x_grid[j] - X_i)/h) * w_i`` on a uniform grid.

    ``dx`` is only used to locate the touched index window (widened by one
    on each side; the evaluator returns 0 outside the support, so rounding
    at the window edges cannot change the sums).  The outer loop runs over
    the time index, so per-grid-point sums accumulate left-to-right in time.
    """
    n_grid = x_grid.shape[0]
    out = np.zeros(n_grid)
    half = 0.5 * h
    x0 = x_grid[0]
    inv_dx = 1.0 / dx
    inv_h = 1.0 / h
    n = samples.shape[0]
    for i in range(n):
        xi = samples[i]
        wi = weights[i]
        lo = int(np.ceil((xi - half - x0) * inv_dx)) - 1
        hi = int(np.floor((xi + half - x0) * inv_dx)) + 1
        if lo < 0:
            lo = 0
        if hi > n_grid - 1:
            hi = n_grid - 1
        for j in range(lo, hi + 1):
            u = (x_grid[j] - xi) * inv_h
            out[j] += _kernel_value(kind, params, u) * wi
    return out


@njit(cache=True, nogil=True)
def kernel_sums_points(samples, weights, points, kind, params, h):
    """Same sums evaluated at an arbitrary (small) set of points."""
    npts = points.shape[0]
    out = np.zeros(npts)
    inv_h = 1.0 / h
    n = samples.shape[0]
    for i in range(n):
        xi = samples[i]
        wi = weights[i]
        for j in range(npts):
            u = (points[j] - xi) * inv_h
            if -0.5 <= u <= 0.5:
                out[j] += _kernel_value(kind, params, u) * wi
    return out


@njit(cache=True, nogil=True, inline="always")
def _ik_value(ik_table, u):
    """Antiderivative of the kernel, interpolated from a dense table on
    [-1/2, 1/2]; constant continuation outside the support."""
    m = ik_table.shape[0]
    if u <= -0.5:
        return 0.0
    if u >= 0.5:
        return ik_table[m - 1]
    pos = (u + 0.5) * (m - 1)
    k = int(pos)
    if k > m - 2:
        k = m - 2
    w = pos - k
    return ik_table[k] + w * (ik_table[k + 1] - ik_table[k])


@njit(cache=True, nogil=True, inline="always")
def _segment_average(kind, params, ik_table, v0, v1):
    """(1/(v0 - v1)) int_{v1}^{v0} K, the kernel averaged along a chord."""
    d = v0 - v1
    if -1e-10 < d < 1e-10:
        return _kernel_value(kind, params, v0)
    return (_ik_value(ik_table, v0) - _ik_value(ik_table, v1)) / d


@njit(cache=True, nogil=True)
def kernel_segment_sums(x_left, x_right, x_grid, dx, kind, params,
                        ik_table, h):
    """out[j] = sum_i segment-averaged kernel along [X_i, X_{i+1}].

    This is the exact time integral of K((x_j - X_u)/h) along the
    linearly interpolated path, divided by the step.
    """
    n_grid = x_grid.shape[0]
    out = np.zeros(n_grid)
    half = 0.5 * h
    x0 = x_grid[0]
    inv_dx = 1.0 / dx
    inv_h = 1.0 / h
    n = x_left.shape[0]
    for i in range(n):
        a = x_left[i]
        b = x_right[i]
        lo_x = min(a, b) - half
        hi_x = max(a, b) + half
        lo = int(np.ceil((lo_x - x0) * inv_dx)) - 1
        hi = int(np.floor((hi_x - x0) * inv_dx)) + 1
        if lo < 0:
            lo = 0
        if hi > n_grid - 1:
            hi = n_grid - 1
        for j in range(lo, hi + 1):
            v0 = (x_grid[j] - a) * inv_h
            v1 = (x_grid[j] - b) * inv_h
            out[j] += _segment_average(kind, params, ik_table, v0, v1)
    return out


@njit(cache=True, nogil=True)
def kernel_segment_sums_points(x_left, x_right, points, kind, params,
                               ik_table, h):
    npts = points.shape[0]
    out = np.zeros(npts)
    inv_h = 1.0 / h
    n = x_left.shape[0]
    for i in range(n):
        a = x_left[i]
        b = x_right[i]
        for j in range(npts):
            v0 = (points[j] - a) * inv_h
            v1 = (points[j] - b) * inv_h
            if (v0 < -0.5 and v1 < -0.5) or (v0 > 0.5 and v1 > 0.5):
                continue
            out[j] += _segment_average(kind, params, ik_table, v0, v1)
    return out
