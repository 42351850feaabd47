"""Numba-compiled grid interpolation kernels (accelerated backend).

Mirrors ``_interp_numpy`` exactly: same snapping, same stencils, same
accumulation order.
"""

import numpy as np
from numba import njit

SNAP_TOL = 1e-9


@njit(cache=True)
def _wrap(i, n):
    m = i % n
    if m < 0:
        m += n
    return m


@njit(cache=True)
def _clampi(i, lo, hi):
    if i < lo:
        return lo
    if i > hi:
        return hi
    return i


@njit(cache=True)
def _interp_flat_jit(vals, n0, n1, n2, d, pts, order, periodic, out):
    npts = pts.shape[0]
    idx = np.empty((3, 4), dtype=np.int64)
    w = np.empty((3, 4), dtype=np.float64)
    taps = 2 if order == 1 else 4
    for ip in range(npts):
        for a in range(d):
            q = pts[ip, a]
            r = np.rint(q)
            if abs(q - r) < SNAP_TOL:
                q = r
            if a == 0:
                n = n0
            elif a == 1:
                n = n1
            else:
                n = n2
            base = np.int64(np.floor(q))
            if order == 1:
                if periodic:
                    t = q - base
                    idx[a, 0] = _wrap(base, n)
                    idx[a, 1] = _wrap(base + 1, n)
                else:
                    base = _clampi(base, 0, n - 2)
                    t = q - base
                    idx[a, 0] = base
                    idx[a, 1] = base + 1
                w[a, 0] = 1.0 - t
                w[a, 1] = t
            else:
                t = q - base
                for k in range(4):
                    i = base - 1 + k
                    if periodic:
                        i = _wrap(i, n)
                    else:
                        i = _clampi(i, 0, n - 1)
                    idx[a, k] = i
                w[a, 0] = ((-t + 2.0) * t - 1.0) * t * 0.5
                w[a, 1] = ((3.0 * t - 5.0) * t * t + 2.0) * 0.5
                w[a, 2] = ((-3.0 * t + 4.0) * t + 1.0) * t * 0.5
                w[a, 3] = (t - 1.0) * t * t * 0.5
        acc = 0.0
        if d == 1:
            for k0 in range(taps):
                acc += w[0, k0] * vals[idx[0, k0]]
        elif d == 2:
            for k0 in range(taps):
                row = idx[0, k0] * n1
                for k1 in range(taps):
                    acc += (w[0, k0] * w[1, k1]) * vals[row + idx[1, k1]]
        else:
            for k0 in range(taps):
                for k1 in range(taps):
                    plane = (idx[0, k0] * n1 + idx[1, k1]) * n2
                    w01 = w[0, k0] * w[1, k1]
                    for k2 in range(taps):
                        acc += (w01 * w[2, k2]) * vals[plane + idx[2, k2]]
        out[ip] = acc


def interp_flat(vals, shape, pts, order, periodic):
    """Numba-backed version of ``_interp_numpy.interp_flat``."""
    d = len(shape)
    if d > 3:
        raise ValueError(f"unsupported dimension {d}")
    n0 = shape[0]
    n1 = shape[1] if d > 1 else 1
    n2 = shape[2] if d > 2 else 1
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    out = np.empty(pts.shape[0], dtype=np.float64)
    _interp_flat_jit(vals, n0, n1, n2, d, pts, order, periodic, out)
    return out
