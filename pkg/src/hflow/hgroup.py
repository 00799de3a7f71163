"""Exact calculus on the first Heisenberg group.

Points are plain numpy arrays of shape (..., 3) holding (x, y, z) group
coordinates; every function broadcasts, so a single point is just shape (3,).
"""

from dataclasses import dataclass

import numpy as np

Point = np.ndarray


def point(x: float, y: float, z: float) -> Point:
    return np.array([x, y, z], dtype=float)


def as_points(p) -> Point:
    a = np.asarray(p, dtype=float)
    if a.shape[-1] != 3:
        raise ValueError(f"expected (..., 3) coordinates, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class HorizontalDirection:
    """Unit direction in the horizontal plane, stored as an angle.

    The planar vector is (cos theta, sin theta); its lift to the group is
    (cos theta, sin theta, 0). Storing the angle makes |v| = 1 structural.
    """

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % (2.0 * np.pi))

    @property
    def vh(self) -> np.ndarray:
        return np.array([np.cos(self.theta), np.sin(self.theta)])

    @property
    def lifted(self) -> Point:
        return np.array([np.cos(self.theta), np.sin(self.theta), 0.0])

    @classmethod
    def from_vector(cls, v1: float, v2: float) -> "HorizontalDirection":
        if v1 == 0.0 and v2 == 0.0:
            raise ValueError("zero vector has no direction")
        return cls(np.arctan2(v2, v1))

    def to_json(self) -> dict:
        return {"theta": self.theta}


def group_mul(p, q) -> Point:
    p, q = as_points(p), as_points(q)
    xp, yp, zp = p[..., 0], p[..., 1], p[..., 2]
    xq, yq, zq = q[..., 0], q[..., 1], q[..., 2]
    return np.stack(
        [xp + xq, yp + yq, zp + zq + 0.5 * (xp * yq - xq * yp)], axis=-1
    )


def group_inverse(p) -> Point:
    return -as_points(p)


def dilation(lam: float, p) -> Point:
    if np.any(np.asarray(lam) < 0):
        raise ValueError("dilation factor must be >= 0")
    p = as_points(p)
    lam = np.asarray(lam, dtype=float)
    return np.stack(
        [lam * p[..., 0], lam * p[..., 1], lam * lam * p[..., 2]], axis=-1
    )


def gauge(p) -> np.ndarray:
    p = as_points(p)
    sq = p[..., 0] ** 2 + p[..., 1] ** 2
    return (sq * sq + 16.0 * p[..., 2] ** 2) ** 0.25


def left_metric(p, q) -> np.ndarray:
    return gauge(group_mul(group_inverse(p), q))


def horizontal_offset(p, q) -> np.ndarray:
    """Signed defect of q from the horizontal plane through p (0 iff q in H_p)."""
    p, q = as_points(p), as_points(q)
    return (
        q[..., 2]
        - p[..., 2]
        - 0.5 * (p[..., 0] * q[..., 1] - q[..., 0] * p[..., 1])
    )


def horizontality_tol(p) -> np.ndarray:
    # scale-aware zero test for horizontal_offset
    return 1e-9 * (1.0 + gauge(p) ** 2)


def is_horizontal(p, q) -> np.ndarray:
    return np.abs(horizontal_offset(p, q)) <= horizontality_tol(p)


def horizontal_step(p, direction, r, sign: int = 1) -> Point:
    """Move from p by sign*r along the lifted direction: p . (sign*r*v).

    `direction` is a HorizontalDirection or a bare angle; r and the angle
    broadcast against p.
    """
    if np.any(np.asarray(r) < 0):
        raise ValueError("step length must be >= 0")
    theta = direction.theta if isinstance(direction, HorizontalDirection) else direction
    p = as_points(p)
    c, s = np.cos(theta), np.sin(theta)
    sr = np.asarray(sign, dtype=float) * np.asarray(r, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    return np.stack(
        [x + sr * c, y + sr * s, z + 0.5 * sr * (x * s - y * c)], axis=-1
    )


def step_offsets(x, y, theta, length):
    """Coordinate increments of a horizontal step, for grid-vectorized use.

    Returns (dx, dy, dz) with dz depending on the foot point (x, y); the
    (+length) move is (x+dx, y+dy, z+dz) and the (-length) move flips signs.
    """
    c, s = np.cos(theta), np.sin(theta)
    dx = length * c
    dy = length * s
    dz = 0.5 * length * (x * s - y * c)
    return dx, dy, dz


def point_to_json(p) -> list:
    p = as_points(p)
    return [float(p[0]), float(p[1]), float(p[2])]
