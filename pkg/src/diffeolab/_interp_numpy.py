"""Pure-numpy grid interpolation kernels (fallback backend).

Semantics are identical to the numba kernels in ``_interp_numba``: the
accumulation order over stencil corners is the same lexicographic order, so
both backends agree to the last bit on typical inputs.
"""

import numpy as np

# Query coordinates within this distance (in index units) of a grid node are
# snapped onto it, so node evaluation reproduces stored samples exactly.
SNAP_TOL = 1e-9


def _snap(pts):
    r = np.rint(pts)
    return np.where(np.abs(pts - r) < SNAP_TOL, r, pts)


def _cubic_weights(t):
    # Keys cubic convolution, a = -1/2 (Catmull-Rom): interpolating, exact on
    # quadratics, O(h^3) on smooth data.
    w0 = ((-t + 2.0) * t - 1.0) * t * 0.5
    w1 = ((3.0 * t - 5.0) * t * t + 2.0) * 0.5
    w2 = ((-3.0 * t + 4.0) * t + 1.0) * t * 0.5
    w3 = (t - 1.0) * t * t * 0.5
    return w0, w1, w2, w3


def _axis_linear(q, n, periodic):
    base = np.floor(q).astype(np.int64)
    if periodic:
        t = q - base
        i0 = np.mod(base, n)
        i1 = np.mod(base + 1, n)
    else:
        base = np.clip(base, 0, n - 2)
        t = q - base
        i0 = base
        i1 = base + 1
    return (i0, i1), (1.0 - t, t)


def _axis_cubic(q, n, periodic):
    base = np.floor(q).astype(np.int64)
    t = q - base
    idx = []
    for k in range(4):
        i = base - 1 + k
        if periodic:
            i = np.mod(i, n)
        else:
            i = np.clip(i, 0, n - 1)
        idx.append(i)
    return tuple(idx), _cubic_weights(t)


def interp_flat(vals, shape, pts, order, periodic):
    """Interpolate a flattened C-order grid at fractional index coordinates.

    vals: (prod(shape),) float64, C-contiguous raveled grid values.
    shape: tuple of 1..3 ints.
    pts: (N, d) fractional index coordinates, one column per axis.
    order: 1 (multilinear) or 3 (tensor Catmull-Rom cubic).
    periodic: True wraps indices, False clamps them to the grid edge.
    """
    d = len(shape)
    pts = _snap(np.asarray(pts, dtype=np.float64))
    axis = _axis_linear if order == 1 else _axis_cubic
    per = [axis(pts[:, a], shape[a], periodic) for a in range(d)]

    out = np.zeros(pts.shape[0], dtype=np.float64)
    if d == 1:
        (idx0, w0) = per[0]
        for k0 in range(len(w0)):
            out += w0[k0] * vals[idx0[k0]]
    elif d == 2:
        (idx0, w0), (idx1, w1) = per
        n1 = shape[1]
        for k0 in range(len(w0)):
            row = idx0[k0] * n1
            for k1 in range(len(w1)):
                out += (w0[k0] * w1[k1]) * vals[row + idx1[k1]]
    elif d == 3:
        (idx0, w0), (idx1, w1), (idx2, w2) = per
        n1, n2 = shape[1], shape[2]
        for k0 in range(len(w0)):
            for k1 in range(len(w1)):
                plane = (idx0[k0] * n1 + idx1[k1]) * n2
                w01 = w0[k0] * w1[k1]
                for k2 in range(len(w2)):
                    out += (w01 * w2[k2]) * vals[plane + idx2[k2]]
    else:
        raise ValueError(f"unsupported dimension {d}")
    return out
