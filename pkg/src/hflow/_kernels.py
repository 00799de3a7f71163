"""Optional numba fast paths for the interpolation and DPP hot loops.

Each kernel mirrors the numpy reference implementation operation-for-operation
(same corner order, same accumulation order, fastmath off), so results are
bit-identical to the fallback and independent of the parallel schedule: every
node's value is a pure function of the inputs.
"""

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is present in CI images
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn

        return deco if not (args and callable(args[0])) else args[0]

    prange = range

_SNAP = 1e-12


@njit(cache=True, inline="always")
def _interp_one(values, lo0, lo1, lo2, hi0, hi1, hi2, h0, h1, h2,
                n0, n1, n2, outside, x, y, z):
    if x < lo0 or x > hi0 or y < lo1 or y > hi1 or z < lo2 or z > hi2:
        return outside
    u = (x - lo0) / h0
    i = int(np.floor(u))
    if i < 0:
        i = 0
    elif i > n0 - 2:
        i = n0 - 2
    tx = u - i
    if tx < _SNAP:
        tx = 0.0
    elif tx > 1.0 - _SNAP:
        tx = 1.0
    u = (y - lo1) / h1
    j = int(np.floor(u))
    if j < 0:
        j = 0
    elif j > n1 - 2:
        j = n1 - 2
    ty = u - j
    if ty < _SNAP:
        ty = 0.0
    elif ty > 1.0 - _SNAP:
        ty = 1.0
    u = (z - lo2) / h2
    k = int(np.floor(u))
    if k < 0:
        k = 0
    elif k > n2 - 2:
        k = n2 - 2
    tz = u - k
    if tz < _SNAP:
        tz = 0.0
    elif tz > 1.0 - _SNAP:
        tz = 1.0

    acc = 0.0
    cmin = np.inf
    cmax = -np.inf
    for di in range(2):
        wx = tx if di == 1 else 1.0 - tx
        for dj in range(2):
            wy = ty if dj == 1 else 1.0 - ty
            for dk in range(2):
                wz = tz if dk == 1 else 1.0 - tz
                corner = values[i + di, j + dj, k + dk]
                acc = acc + (wx * wy * wz) * corner
                if corner < cmin:
                    cmin = corner
                if corner > cmax:
                    cmax = corner
    if acc < cmin:
        acc = cmin
    if acc > cmax:
        acc = cmax
    return acc


@njit(cache=True, parallel=True)
def interp_batch(values, lo, hi, h, outside, pts):
    n0, n1, n2 = values.shape
    out = np.empty(pts.shape[0])
    for idx in prange(pts.shape[0]):
        out[idx] = _interp_one(
            values, lo[0], lo[1], lo[2], hi[0], hi[1], hi[2],
            h[0], h[1], h[2], n0, n1, n2, outside,
            pts[idx, 0], pts[idx, 1], pts[idx, 2],
        )
    return out


@njit(cache=True, parallel=True)
def dpp_step_kernel(values, lo, hi, h, outside, ax0, ax1, ax2,
                    cos_t, sin_t, length):
    n0, n1, n2 = values.shape
    m = cos_t.shape[0]
    out = np.empty((n0, n1, n2))
    for flat in prange(n0 * n1 * n2):
        i = flat // (n1 * n2)
        rem = flat - i * (n1 * n2)
        j = rem // n2
        k = rem - j * n2
        x = ax0[i]
        y = ax1[j]
        z = ax2[k]
        best = np.inf
        for t in range(m):
            c = cos_t[t]
            s = sin_t[t]
            dx = length * c
            dy = length * s
            dz = 0.5 * length * (x * s - y * c)
            a = _interp_one(values, lo[0], lo[1], lo[2], hi[0], hi[1], hi[2],
                            h[0], h[1], h[2], n0, n1, n2, outside,
                            x + dx, y + dy, z + dz)
            b = _interp_one(values, lo[0], lo[1], lo[2], hi[0], hi[1], hi[2],
                            h[0], h[1], h[2], n0, n1, n2, outside,
                            x - dx, y - dy, z - dz)
            v = a if a > b else b
            if v < best:
                best = v
        out[i, j, k] = best
    return out
