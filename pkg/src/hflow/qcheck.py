"""Sampling-based verification of horizontal quasiconvexity.

All checks here are brute-force searches over structured sample plans:
presence of a violation is exact evidence, absence is only evidence at the
plan's density. Base points p are paired with the two endpoints p.(r v) and
p.(r v^{-1}) of a horizontal chord; every pair of points on that chord is
horizontally related, so the chord and its Euclidean sub-segments are
legitimate test segments.
"""

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from . import hcalc, hgroup
from .fields import Bounds, ScalarField

GAP_TOL = 1e-9


@dataclass(frozen=True)
class SamplingPlan:
    """Base points x direction angles x chord radii, plus segment resolution.

    Angles cover [0, pi) only; the opposite half-circle is reached through the
    +/- endpoints of each chord. segment_samples is odd so the midpoint (the
    base point itself) is always sampled.
    """

    base_points: np.ndarray
    directions: int = 36
    radii: tuple = (0.05, 0.1, 0.2, 0.4)
    segment_samples: int = 33
    seed: Optional[int] = None

    def __post_init__(self):
        pts = np.asarray(self.base_points, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "base_points", pts)
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if self.directions < 4:
            raise ValueError("need at least 4 direction angles")
        if any(r <= 0 for r in self.radii):
            raise ValueError("radii must be positive")
        if self.segment_samples < 3 or self.segment_samples % 2 == 0:
            raise ValueError("segment_samples must be odd and >= 3")

    @property
    def thetas(self) -> np.ndarray:
        m = self.directions
        return np.pi * np.arange(m) / m

    @property
    def lambdas(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.segment_samples)

    def to_json(self) -> dict:
        return {
            "n_base_points": int(self.base_points.shape[0]),
            "directions": self.directions,
            "radii": list(self.radii),
            "segment_samples": self.segment_samples,
            "seed": self.seed,
        }


def plan_from_grid(bounds: Bounds, dims=(21, 21, 21), directions=36,
                   radii=(0.05, 0.1, 0.2, 0.4), segment_samples=33) -> SamplingPlan:
    ax = bounds.axes(dims)
    X, Y, Z = np.meshgrid(*ax, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
    return SamplingPlan(pts, directions, radii, segment_samples)


def default_plan(bounds: Bounds) -> SamplingPlan:
    """Desk-scale default: 21^3 base grid, 36 angles, radii 0.05 .. 0.4."""
    return plan_from_grid(bounds)


def random_plan(bounds: Bounds, n_points: int, seed: int, directions=36,
                radii=(0.05, 0.1, 0.2, 0.4), segment_samples=33) -> SamplingPlan:
    rng = np.random.default_rng(seed)
    lo = np.array(bounds.lo)
    hi = np.array(bounds.hi)
    pts = lo + (hi - lo) * rng.random((n_points, 3))
    return SamplingPlan(pts, directions, radii, segment_samples, seed=seed)


@dataclass(frozen=True)
class HqcWitness:
    """A sampled quasiconvexity violation: f exceeds both endpoint values by
    `gap` at the point w of the horizontal segment [p, q]."""

    p: np.ndarray
    q: np.ndarray
    w: np.ndarray
    gap: float

    def to_json(self) -> dict:
        return {
            "p": hgroup.point_to_json(self.p),
            "q": hgroup.point_to_json(self.q),
            "w": hgroup.point_to_json(self.w),
            "gap": self.gap,
        }


@dataclass(frozen=True)
class UniformHqcParams:
    lam: float
    r0: float

    def __post_init__(self):
        if self.lam <= 0 or self.r0 <= 0:
            raise ValueError("uniform h-quasiconvexity constants must be positive")


def _chord_endpoints(pts: np.ndarray, thetas: np.ndarray, r: float):
    """Endpoints p.(r v) and p.(r v^{-1}) for all base points x angles."""
    x = pts[:, 0][:, None]
    y = pts[:, 1][:, None]
    z = pts[:, 2][:, None]
    dx, dy, dz = hgroup.step_offsets(x, y, thetas[None, :], r)
    qp = np.stack([x + dx, y + dy, z + dz], axis=-1)
    qm = np.stack([x - dx, y - dy, z - dz], axis=-1)
    return qp, qm


def check_triple(f: ScalarField, p, q, plan: SamplingPlan) -> float:
    """Worst sampled violation of f(w) <= max(f(p), f(q)) on the horizontal
    segment [p, q]; <= 0 means no violation was detected."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    off = hgroup.horizontal_offset(p, q)
    if abs(off) > hgroup.horizontality_tol(p):
        raise ValueError(f"pair is not horizontal (offset {off:g})")
    lam = plan.lambdas[:, None]
    w = p[None, :] + lam * (q - p)[None, :]
    fw = f(w)
    return float(np.max(fw) - max(float(f(p)), float(f(q))))


def _all_chord_endpoints(pts: np.ndarray, thetas: np.ndarray, radii) -> tuple:
    """Endpoints for every base point x angle x radius, shape (N, M, R, 3)."""
    x = pts[:, 0][:, None, None]
    y = pts[:, 1][:, None, None]
    z = pts[:, 2][:, None, None]
    th = thetas[None, :, None]
    r = np.asarray(radii, dtype=float)[None, None, :]
    dx, dy, dz = hgroup.step_offsets(x, y, th, r)
    qp = np.stack([x + dx, y + dy, z + dz], axis=-1)
    qm = np.stack([x - dx, y - dy, z - dz], axis=-1)
    return qp, qm


def search_violation(f: ScalarField, plan: SamplingPlan) -> Optional[HqcWitness]:
    """Largest-gap quasiconvexity violation over the plan, or None if every
    sampled triple satisfies the inequality within GAP_TOL.

    Interior segment samples only: the endpoint lambdas cannot produce a
    positive gap, so skipping them loses nothing.
    """
    lambdas = plan.lambdas[1:-1]
    qp, qm = _all_chord_endpoints(plan.base_points, plan.thetas, plan.radii)
    f_end = np.maximum(f(qp), f(qm))
    max_w = np.full(f_end.shape, -np.inf)
    arg_w = np.zeros(f_end.shape, dtype=np.int64)
    for s_idx, s in enumerate(lambdas):
        fw = f(qm + s * (qp - qm))
        better = fw > max_w
        max_w = np.where(better, fw, max_w)
        arg_w = np.where(better, s_idx, arg_w)
    gaps = max_w - f_end
    idx = np.unravel_index(np.argmax(gaps), gaps.shape)
    best_gap = float(gaps[idx])
    if best_gap <= GAP_TOL:
        return None
    s = lambdas[arg_w[idx]]
    return HqcWitness(
        p=qm[idx], q=qp[idx], w=qm[idx] + s * (qp[idx] - qm[idx]), gap=best_gap
    )


def check_uniform(f: ScalarField, params: UniformHqcParams, plan: SamplingPlan,
                  domain: Optional[Callable] = None) -> float:
    """Worst margin of the symmetric-step inequality
    max(f(p.rv), f(p.rv^{-1})) - f(p) - lam r^2 over the plan (radii < r0).
    >= 0 means the uniform inequality held on all samples. `domain` masks
    base points and endpoints when the inequality is only claimed on a set.
    """
    radii = [r for r in plan.radii if r < params.r0]
    if not radii:
        raise ValueError("no plan radii below r0")
    worst = np.inf
    fp = f(plan.base_points)
    for r in radii:
        qp, qm = _chord_endpoints(plan.base_points, plan.thetas, r)
        margins = np.maximum(f(qp), f(qm)) - fp[:, None] - params.lam * r * r
        if domain is not None:
            ok = (
                domain(plan.base_points)[:, None]
                & domain(qp.reshape(-1, 3)).reshape(qp.shape[:2])
                & domain(qm.reshape(-1, 3)).reshape(qm.shape[:2])
            )
            if not np.any(ok):
                continue
            margins = margins[ok]
        worst = min(worst, float(np.min(margins)))
    return worst


class PreconditionError(ValueError):
    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point


@dataclass(frozen=True)
class C2UniformResult:
    worst_margin: float
    r0_empirical: float
    per_radius: tuple  # ((r, margin), ...) descending r
    operator_min: float


def check_c2_uniform(f: ScalarField, box: Bounds, sigma: float, lam: float,
                     plan: SamplingPlan,
                     cfg: hcalc.OperatorConfig = hcalc.ANALYTIC_CFG) -> C2UniformResult:
    """Empirical version of the smooth-case implication: an operator bound
    2*lam on a compact box yields the symmetric-step inequality with constant
    sigma*lam below some radius r0. Scans the plan radii downward and reports
    the largest radius from which all smaller sampled radii keep a
    nonnegative margin."""
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    lo = np.array(box.lo)
    hi = np.array(box.hi)
    inside = np.all((plan.base_points >= lo) & (plan.base_points <= hi), axis=1)
    pts = plan.base_points[inside]
    if pts.shape[0] == 0:
        raise ValueError("no plan base points inside the box")
    op_vals = hcalc.op_L(f, pts, cfg)
    op_min = float(np.min(op_vals))
    if op_min < 2.0 * lam - 1e-9:
        bad = pts[int(np.argmin(op_vals))]
        raise PreconditionError(
            f"operator bound failed: min {op_min:g} < {2 * lam:g} at {bad}", point=bad
        )
    fp = f(pts)
    per_radius = []
    for r in sorted(plan.radii, reverse=True):
        qp, qm = _chord_endpoints(pts, plan.thetas, r)
        margins = np.maximum(f(qp), f(qm)) - fp[:, None] - sigma * lam * r * r
        per_radius.append((r, float(np.min(margins))))
    # largest radius from which every smaller sampled radius keeps margin >= 0
    r0_emp = 0.0
    for r, margin in sorted(per_radius):
        if margin >= -GAP_TOL:
            r0_emp = r
        else:
            break
    worst = min(m for _, m in per_radius)
    return C2UniformResult(worst, r0_emp, tuple(per_radius), op_min)


@dataclass(frozen=True)
class SetWitness:
    p: np.ndarray
    q: np.ndarray
    w: np.ndarray

    def to_json(self) -> dict:
        return {
            "p": hgroup.point_to_json(self.p),
            "q": hgroup.point_to_json(self.q),
            "w": hgroup.point_to_json(self.w),
        }


def check_set_hconvex(member: Callable, plan: SamplingPlan) -> Optional[SetWitness]:
    """Search for a horizontal segment with both endpoints in the set but a
    sampled interior point outside; None means no violation found."""
    pts = plan.base_points
    base_in = np.asarray(member(pts), dtype=bool)
    lambdas = plan.lambdas[1:-1]
    for r in plan.radii:
        qp, qm = _chord_endpoints(pts, plan.thetas, r)
        in_p = np.asarray(member(qp.reshape(-1, 3)), dtype=bool).reshape(qp.shape[:2])
        in_m = np.asarray(member(qm.reshape(-1, 3)), dtype=bool).reshape(qm.shape[:2])
        # segment q- .. q+ needs only its endpoints in the set; segments
        # p .. q+/- additionally need the base point
        for lo_pts, hi_pts, pair_ok in (
            (qm, qp, in_m & in_p),
            (np.broadcast_to(pts[:, None, :], qp.shape), qp, base_in[:, None] & in_p),
            (np.broadcast_to(pts[:, None, :], qm.shape), qm, base_in[:, None] & in_m),
        ):
            if not np.any(pair_ok):
                continue
            for s in lambdas:
                w = lo_pts + s * (hi_pts - lo_pts)
                out_w = ~np.asarray(member(w.reshape(-1, 3)), dtype=bool).reshape(w.shape[:2])
                hit = pair_ok & out_w
                if np.any(hit):
                    idx = np.unravel_index(np.argmax(hit), hit.shape)
                    return SetWitness(p=lo_pts[idx], q=hi_pts[idx], w=w[idx])
    return None
