"""Deterministic low-discrepancy point sets used by shell sampling and
boundary probes. Everything here is seed-free and reproducible."""

import numpy as np

from . import hgroup


def halton(n: int, bases=(2, 3, 5), skip: int = 20) -> np.ndarray:
    """First n Halton points in [0,1)^d for the given prime bases."""
    out = np.empty((n, len(bases)))
    for j, b in enumerate(bases):
        idx = np.arange(skip, skip + n)
        col = np.zeros(n)
        f = 1.0
        i = idx.copy()
        while np.any(i > 0):
            f /= b
            col += f * (i % b)
            i //= b
        out[:, j] = col
    return out


def unit_gauge_ball_points(n: int) -> np.ndarray:
    """n quasi-uniform points of the unit gauge ball (rejection from a cube).

    Coordinates respect the anisotropic scaling: the z slot of the cube is
    [-1/4, 1/4] since |(x,y,z)|_G <= 1 forces |z| <= 1/4.
    """
    pts = []
    offset = 0
    while len(pts) < n:
        h = halton(4 * n, skip=20 + offset)
        cand = np.column_stack(
            [2 * h[:, 0] - 1, 2 * h[:, 1] - 1, 0.5 * h[:, 2] - 0.25]
        )
        keep = cand[hgroup.gauge(cand) <= 1.0]
        pts.extend(keep.tolist())
        offset += 4 * n
    return np.array(pts[:n])


def unit_gauge_sphere_points(n: int, include_poles: bool = True) -> np.ndarray:
    """n points with Koranyi gauge exactly 1 (dilation-normalized ball points)."""
    raw = unit_gauge_ball_points(2 * n)
    g = hgroup.gauge(raw)
    raw = raw[g > 1e-6]
    g = hgroup.gauge(raw)
    normed = np.stack(
        [raw[:, 0] / g, raw[:, 1] / g, raw[:, 2] / (g * g)], axis=-1
    )
    if include_poles:
        normed[0] = [0.0, 0.0, 0.25]
        normed[1] = [0.0, 0.0, -0.25]
    return normed[:n]


def gauge_ball_shell(p, r: float, n: int) -> np.ndarray:
    """n quasi-uniform points of the gauge ball B_r(p), via group translation."""
    u = unit_gauge_ball_points(n)
    w = np.stack([r * u[:, 0], r * u[:, 1], r * r * u[:, 2]], axis=-1)
    return hgroup.group_mul(np.asarray(p, dtype=float), w)
