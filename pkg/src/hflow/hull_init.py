"""Minkowski-type functional of a star-shaped set and construction of
uniformly h-quasiconvex initial data for the flow solver.

The functional U0 assigns to p the inverse square of the dilation scale at
which the ray mu -> delta_mu(p) leaves the open set E0; under the strict
star-shapedness condition the crossing is unique and bisection locates it.
U0 is 2-homogeneous under the group dilation, equals 1 on the boundary, and
is sandwiched between gauge^2/R^2 and gauge^2/r^2 for inscribed/circumscribed
gauge-ball radii r, R.
"""

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from . import hgroup, qcheck, sampling
from .fields import Bounds, ProfileFunction, ScalarField, profile_gauge_ball

DEFAULT_TOL = 1e-10


class StarShapeError(ValueError):
    def __init__(self, msg, ray=None, mu=None):
        super().__init__(msg)
        self.ray = ray
        self.mu = mu


@dataclass(frozen=True)
class StarShapedSet:
    """Open bounded set given by a membership oracle plus gauge-ball radii
    r, R with B_r(0) inside E0 inside B_R(0). `member` must be vectorized
    over (..., 3) and use strict inequalities (open set)."""

    member: Callable[[np.ndarray], np.ndarray]
    inner_radius: float
    outer_radius: float
    name: str = ""

    def __post_init__(self):
        if not 0 < self.inner_radius <= self.outer_radius:
            raise ValueError("need 0 < r <= R")

    def contains(self, pts) -> np.ndarray:
        return np.asarray(self.member(np.asarray(pts, dtype=float)), dtype=bool)


def minkowski_u0(E: StarShapedSet, pts, tol: float = DEFAULT_TOL,
                 scan: int = 0) -> np.ndarray:
    """U0 at one point or a batch, by bisection along dilation rays.

    Brackets come from the inscribed/circumscribed radii, so the low end is
    always inside and the high end always outside. With scan > 0 the bracket
    is first swept at that many scales and a non-monotone membership pattern
    (a strict-star-shapedness violation) raises StarShapeError.
    """
    pts = np.asarray(pts, dtype=float)
    scalar = pts.ndim == 1
    p = pts.reshape(-1, 3)
    g = hgroup.gauge(p)
    out = np.zeros(p.shape[0])
    live = g > 0.0
    q = p[live]
    gq = g[live]
    if q.shape[0]:
        lo = (E.inner_radius / gq) * (1.0 - 1e-12)
        hi = (E.outer_radius / gq) * (1.0 + 1e-12)
        if scan > 0:
            mus = np.linspace(0.0, 1.0, scan + 2)[1:-1]
            grid = lo[:, None] + (hi - lo)[:, None] * mus[None, :]
            inside = E.contains(_dilate_batch(q, grid))
            flips = np.diff(inside.astype(np.int8), axis=1)
            n_exit = np.sum(flips == -1, axis=1)
            n_enter = np.sum(flips == 1, axis=1)
            bad = (n_exit + n_enter) > 1
            if np.any(bad):
                i = int(np.argmax(bad))
                k = int(np.argmax(flips[i] == 1))
                raise StarShapeError(
                    "non-monotone membership along dilation ray",
                    ray=q[i],
                    mu=float(grid[i, k]),
                )
        if not np.all(E.contains(_dilate_batch(q, lo[:, None])[:, 0, :])):
            raise StarShapeError("inner bracket outside the set; check inner_radius")
        if np.any(E.contains(_dilate_batch(q, hi[:, None])[:, 0, :])):
            raise StarShapeError("outer bracket inside the set; check outer_radius")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            inside = E.contains(_dilate_batch(q, mid[:, None])[:, 0, :])
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
            if np.max((hi - lo) / lo) <= tol:
                break
        mu = 0.5 * (lo + hi)
        out[live] = mu ** (-2.0)
    out = out.reshape(pts.shape[:-1])
    return float(out) if scalar else out


def _dilate_batch(pts: np.ndarray, mus: np.ndarray) -> np.ndarray:
    """delta_mu(p) for (N, 3) points and (N,) or (N, K) scales."""
    if mus.ndim == 1:
        mus = mus[:, None]
    x = mus[..., None] * pts[:, None, 0:1]
    y = mus[..., None] * pts[:, None, 1:2]
    z = (mus * mus)[..., None] * pts[:, None, 2:3]
    return np.concatenate([x, y, z], axis=-1)


def boundary_points(E: StarShapedSet, rays, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Boundary points located by scaling rays onto the level U0 = 1."""
    rays = np.asarray(rays, dtype=float).reshape(-1, 3)
    rays = rays[hgroup.gauge(rays) > 1e-9]
    u = minkowski_u0(E, rays, tol)
    mu = u ** (-0.5)
    return np.stack(
        [mu * rays[:, 0], mu * rays[:, 1], mu * mu * rays[:, 2]], axis=-1
    )


@dataclass(frozen=True)
class S1Violation:
    p: np.ndarray
    mu: float


def check_S1(E: StarShapedSet, mus=None, n_boundary: int = 256,
             tol: float = DEFAULT_TOL) -> Optional[S1Violation]:
    """Sampled strict star-shapedness: every contraction delta_mu (mu < 1) of
    a near-boundary point must land inside the set."""
    if mus is None:
        mus = np.linspace(0.05, 0.99, 20)
    mus = np.asarray(mus, dtype=float)
    rays = sampling.unit_gauge_sphere_points(n_boundary)
    bd = boundary_points(E, rays, tol)
    # boundary points as located (within bisection tol) and slightly inside
    probes = np.concatenate([bd, _shrink(bd, 1.0 - 1e-6)], axis=0)
    for mu in mus:
        contracted = _shrink(probes, mu)
        inside = E.contains(contracted)
        if not np.all(inside):
            i = int(np.argmin(inside))
            return S1Violation(p=probes[i], mu=float(mu))
    return None


def _shrink(pts: np.ndarray, mu: float) -> np.ndarray:
    return np.stack(
        [mu * pts[:, 0], mu * pts[:, 1], mu * mu * pts[:, 2]], axis=-1
    )


def check_S2(E: StarShapedSet, r0: float, sigma: float,
             plan: qcheck.SamplingPlan, tol: float = DEFAULT_TOL) -> float:
    """Worst margin of max(U0(p.rv), U0(p.rv^{-1})) - 1 - sigma r^2 over
    boundary points (from ray bisection of the plan's base points), plan
    directions, and plan radii below r0. >= 0 means the reinforced
    h-convexity condition held on the samples."""
    radii = [r for r in plan.radii if r < r0]
    if not radii:
        raise ValueError("no plan radii below r0")
    bd = boundary_points(E, plan.base_points, tol)
    worst = np.inf
    for r in radii:
        qp, qm = qcheck._chord_endpoints(bd, plan.thetas, r)
        up = minkowski_u0(E, qp.reshape(-1, 3), tol).reshape(qp.shape[:2])
        um = minkowski_u0(E, qm.reshape(-1, 3), tol).reshape(qm.shape[:2])
        margins = np.maximum(up, um) - 1.0 - sigma * r * r
        worst = min(worst, float(np.min(margins)))
    return worst


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InitialData:
    """Defining function u_hat of the set (negative exactly on E0) and its
    truncation u0 = min(u_hat, C), together with the constants that built
    them."""

    u_hat: ScalarField
    u0: ScalarField
    C: float
    c: float
    rho: float
    set_: StarShapedSet
    tol: float

    def to_json(self) -> dict:
        return {
            "set": self.set_.name,
            "C": self.C,
            "c": self.c,
            "rho": self.rho,
            "bisection_tol": self.tol,
        }


def psi_c(c: float, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    return c * (pts[..., 0] ** 2 + pts[..., 1] ** 2 + np.abs(pts[..., 2])) + 0.5


def build_initial(E: StarShapedSet, C: Optional[float] = None,
                  tol: float = DEFAULT_TOL) -> InitialData:
    """Assemble u_hat = max(U0, psi_c) - 1 and u0 = min(u_hat, C).

    rho is a ball radius on which U0 < 1/2 (guaranteed by the inscribed
    radius, then verified on samples); c is halved from 1 until the paraboloid
    term stays below U0 on sampled boundary points, which keeps the negativity
    set of u_hat equal to E0. C defaults to twice the sampled maximum of u_hat
    on the ball of radius 2R.
    """
    rho = (E.inner_radius / np.sqrt(2.0)) * (1.0 - 1e-9)
    ball = sampling.unit_gauge_ball_points(512)
    rho_pts = np.stack(
        [rho * ball[:, 0], rho * ball[:, 1], rho * rho * ball[:, 2]], axis=-1
    )
    u_rho = minkowski_u0(E, rho_pts, tol)
    if np.max(u_rho) >= 0.5:
        rho *= 0.5  # inscribed radius was not tight; retreat once
        rho_pts = _shrink(rho_pts, 0.5)
        if np.max(minkowski_u0(E, rho_pts, tol)) >= 0.5:
            raise StarShapeError("could not find a ball with U0 < 1/2")

    rays = sampling.unit_gauge_sphere_points(512)
    bd = boundary_points(E, rays, tol)
    qmax = float(np.max(bd[:, 0] ** 2 + bd[:, 1] ** 2 + np.abs(bd[:, 2])))
    c = 1.0
    for _ in range(60):
        if c * qmax < 0.5 * (1.0 - 1e-9):
            break
        c *= 0.5
    else:
        raise StarShapeError(f"no admissible paraboloid coefficient; q_max = {qmax:g}")

    def u_hat_fn(pts):
        return np.maximum(minkowski_u0(E, pts, tol), psi_c(c, pts)) - 1.0

    u_hat = ScalarField(fn=u_hat_fn, name=f"u-hat[{E.name}]")
    if C is None:
        shell = sampling.unit_gauge_ball_points(512)
        big = 2.0 * E.outer_radius
        big_pts = np.stack(
            [big * shell[:, 0], big * shell[:, 1], big * big * shell[:, 2]], axis=-1
        )
        C = 2.0 * float(np.max(u_hat(big_pts)))
    C = float(C)

    def u0_fn(pts):
        return np.minimum(u_hat_fn(pts), C)

    u0 = ScalarField(fn=u0_fn, name=f"u0[{E.name}]")
    return InitialData(u_hat=u_hat, u0=u0, C=C, c=c, rho=rho, set_=E, tol=tol)


# ---------------------------------------------------------------------------
# rotationally symmetric sets and profiles
# ---------------------------------------------------------------------------


def profile_set(g: ProfileFunction, n_scan: int = 4001) -> StarShapedSet:
    """Body of revolution {x^2 + y^2 < g(z), a < z < b} with gauge radii
    computed from a dense scan of the boundary curve."""
    if not g.bounded:
        raise ValueError("profile needs finite endpoints a < 0 < b")
    if not (g.a < 0.0 < g.b):
        raise ValueError("endpoints must straddle 0")
    zs = np.linspace(g.a, g.b, n_scan)
    gz = np.asarray(g.value(zs), dtype=float)
    if np.any(gz[1:-1] <= 0.0):
        raise ValueError("profile must be positive on the open interval")
    bd_gauge4 = gz * gz + 16.0 * zs * zs
    r = float(np.min(bd_gauge4) ** 0.25) * (1.0 - 1e-9)
    R = float(np.max(bd_gauge4) ** 0.25) * (1.0 + 1e-9)

    def member(pts):
        pts = np.asarray(pts, dtype=float)
        z = pts[..., 2]
        ok = (z > g.a) & (z < g.b)
        gz = np.where(ok, g.value(np.clip(z, g.a, g.b)), 0.0)
        return ok & (pts[..., 0] ** 2 + pts[..., 1] ** 2 < gz)

    return StarShapedSet(member, r, R, name=f"profile[{g.name}]")


@dataclass(frozen=True)
class ProfileS1Violation:
    z: float
    mu: float
    defect: float


def check_profile_S1(g: ProfileFunction, mus=None, zs=None) -> Optional[ProfileS1Violation]:
    """Sampled check of mu g(z) < g(mu z): the graph version of strict
    star-shapedness for bodies of revolution."""
    if mus is None:
        mus = np.linspace(0.005, 0.995, 199)
    if zs is None:
        zs = np.linspace(g.a, g.b, 401)
    mus = np.asarray(mus, dtype=float)
    zs = np.asarray(zs, dtype=float)
    gz = np.asarray(g.value(zs), dtype=float)
    gm = np.asarray(g.value(mus[:, None] * zs[None, :]), dtype=float)
    defect = gm - mus[:, None] * gz[None, :]
    if np.all(defect > 0.0):
        return None
    i, j = np.unravel_index(np.argmin(defect), defect.shape)
    return ProfileS1Violation(z=float(zs[j]), mu=float(mus[i]), defect=float(defect[i, j]))


def check_profile_S2cond(g: ProfileFunction, sigma: float, zs=None) -> float:
    """Worst margin of 1 - 2 g g'' / (16 + g'^2) - sigma over the z-samples;
    > 0 means the quantitative graph condition holds with that sigma."""
    if zs is None:
        zs = np.linspace(g.a, g.b, 10001)
    zs = np.asarray(zs, dtype=float)
    gz = np.asarray(g.value(zs), dtype=float)
    dg = np.asarray(g.deriv(zs), dtype=float)
    d2g = np.asarray(g.deriv2(zs), dtype=float)
    expr = 1.0 - 2.0 * gz * d2g / (16.0 + dg * dg)
    return float(np.min(expr - sigma))


def gauge_ball_gj(j: int) -> ProfileFunction:
    """C^1 concave approximation of the gauge-ball profile: the circle-like
    arc on |z| < m_j glued to its quadratic Taylor continuations, which reach
    zero at +/- b_j slightly beyond 1/4."""
    if j < 5:
        raise ValueError("need j >= 5 so that m_j = 1/4 - 1/j > 0")
    m = 0.25 - 1.0 / j
    base = profile_gauge_ball()
    gm = float(base.fn(np.float64(m)))
    dgm = float(base.dfn(np.float64(m)))
    d2gm = float(base.d2fn(np.float64(m)))
    # root of the endpoint quadratic beyond m (coefficients: a t^2 + b t + c)
    a_c, b_c, c_c = 0.5 * d2gm, dgm, gm
    disc = b_c * b_c - 4.0 * a_c * c_c
    t_pos = (-b_c - np.sqrt(disc)) / (2.0 * a_c)
    b_j = m + float(t_pos)
    a_j = -b_j

    def quad(t):
        # symmetric: evaluate on |z| with the right-hand Taylor polynomial
        return gm + dgm * (t - m) + 0.5 * d2gm * (t - m) ** 2

    def fn(z):
        z = np.asarray(z, dtype=float)
        az = np.abs(z)
        return np.where(az < m, base.fn(np.clip(z, -m, m)), quad(az))

    def dfn(z):
        z = np.asarray(z, dtype=float)
        az = np.abs(z)
        outer = dgm + d2gm * (az - m)
        return np.where(az < m, base.dfn(np.clip(z, -m, m)), np.sign(z) * outer)

    def d2fn(z):
        z = np.asarray(z, dtype=float)
        az = np.abs(z)
        return np.where(az < m, base.d2fn(np.clip(z, -m, m)), d2gm + 0.0 * z)

    return ProfileFunction(fn, dfn, d2fn, a=a_j, b=b_j, name=f"gauge-ball-g{j}")


def flow_bounds(E: StarShapedSet, C: float, pad: float,
                tol: float = DEFAULT_TOL, n_rays: int = 1024) -> Bounds:
    """Box containing {u_hat < C} plus padding, for flow grids.

    By 2-homogeneity, {U0 < C + 1} is the dilation of E0 by sqrt(C + 1), so
    the extents follow from scanned boundary extents of E0 itself. Outside
    the returned box the truncated data is identically C, which is exactly
    what the grid's constant extension assumes.
    """
    if C <= 0:
        raise ValueError("flow truncation must be positive here")
    bd = boundary_points(E, sampling.unit_gauge_sphere_points(n_rays), tol)
    s = np.sqrt(C + 1.0)
    x_half = s * float(np.max(np.abs(bd[:, 0]))) + pad
    y_half = s * float(np.max(np.abs(bd[:, 1]))) + pad
    z_half = (C + 1.0) * float(np.max(np.abs(bd[:, 2]))) + pad
    half = max(x_half, y_half)
    return Bounds((-half, -half, -z_half), (half, half, z_half))


def coercivity_profile(u_hat: ScalarField, radii, n: int = 256) -> list:
    """Sampled minimum of u_hat on gauge spheres of growing radius."""
    dirs = sampling.unit_gauge_sphere_points(n)
    out = []
    for R in radii:
        pts = np.stack(
            [R * dirs[:, 0], R * dirs[:, 1], R * R * dirs[:, 2]], axis=-1
        )
        out.append((float(R), float(np.min(u_hat(pts)))))
    return out
