"""Horizontal differential operators.

The central object is the degenerate elliptic operator that evaluates the
symmetrized horizontal Hessian in the direction perpendicular to the
horizontal gradient. It is discontinuous where the gradient vanishes, so the
module carries three variants: the raw operator (minimum eigenvalue at
characteristic points), its argument-relaxed envelope (maximum eigenvalue
there), and a sampled surrogate of the upper limit of p -> L[f](p).
"""

from dataclasses import dataclass

import numpy as np

from . import hgroup, sampling
from .fields import ProfileFunction, FRhoZ, ScalarField


@dataclass(frozen=True)
class HessianSym2:
    """Symmetric 2x2 matrix with closed-form eigenvalues."""

    a11: float
    a12: float
    a22: float

    @property
    def eig_min(self) -> float:
        mean = 0.5 * (self.a11 + self.a22)
        return mean - np.hypot(0.5 * (self.a11 - self.a22), self.a12)

    @property
    def eig_max(self) -> float:
        mean = 0.5 * (self.a11 + self.a22)
        return mean + np.hypot(0.5 * (self.a11 - self.a22), self.a12)

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    @classmethod
    def from_matrix(cls, m) -> "HessianSym2":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), 0.5 * float(m[0, 1] + m[1, 0]), float(m[1, 1]))


@dataclass(frozen=True)
class OperatorConfig:
    """Numerical knobs for operator evaluation.

    fd_step / fd_step2 are the central-difference steps for first and second
    horizontal derivatives. grad_tol scales the characteristic-point test:
    the gradient counts as zero when |grad| <= grad_tol * (1 + |H|_inf); the
    branch taken there is the operator's essential discontinuity, so the
    threshold is a visible parameter rather than a constant.
    """

    fd_step: float = 1e-3
    fd_step2: float = 1e-2
    grad_tol: float = 1e-8
    limsup_radii: tuple = (1e-1, 1e-2, 1e-3)
    limsup_samples: int = 64

    def __post_init__(self):
        radii = tuple(float(r) for r in self.limsup_radii)
        if any(r <= 0 for r in radii) or any(
            radii[i] <= radii[i + 1] for i in range(len(radii) - 1)
        ):
            raise ValueError("limsup_radii must be strictly decreasing and positive")
        object.__setattr__(self, "limsup_radii", radii)


DEFAULT_CFG = OperatorConfig()
# exact-zero classification; appropriate when analytic derivatives are present
ANALYTIC_CFG = OperatorConfig(grad_tol=0.0)


def _fd_grad(f: ScalarField, pts: np.ndarray, h: float) -> np.ndarray:
    comps = []
    for theta in (0.0, 0.5 * np.pi):
        fp = f(hgroup.horizontal_step(pts, theta, h, +1))
        fm = f(hgroup.horizontal_step(pts, theta, h, -1))
        comps.append((fp - fm) / (2.0 * h))
    return np.stack(comps, axis=-1)


def _fd_hess(f: ScalarField, pts: np.ndarray, h: float) -> np.ndarray:
    f0 = f(pts)

    def second_along(theta, scale=1.0):
        # second derivative along the group line t -> p . (t v); the line is
        # the integral curve of the constant-direction horizontal field
        fp = f(hgroup.horizontal_step(pts, theta, scale * h, +1))
        fm = f(hgroup.horizontal_step(pts, theta, scale * h, -1))
        return (fp - 2.0 * f0 + fm) / (scale * h) ** 2

    x11 = second_along(0.0)
    x22 = second_along(0.5 * np.pi)
    diag = second_along(0.25 * np.pi) * 2.0  # (X1+X2)^2, direction length sqrt(2)
    a12 = 0.5 * (diag - x11 - x22)
    row1 = np.stack([x11, a12], axis=-1)
    row2 = np.stack([a12, x22], axis=-1)
    return np.stack([row1, row2], axis=-2)


def hgrad(f: ScalarField, pts, cfg: OperatorConfig = DEFAULT_CFG) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    g = f.grad_h(pts) if f.grad_h is not None else _fd_grad(f, pts, cfg.fd_step)
    if not np.all(np.isfinite(g)):
        raise ValueError("non-finite horizontal gradient")
    return g


def hhess(f: ScalarField, pts, cfg: OperatorConfig = DEFAULT_CFG) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    h = f.hess_h(pts) if f.hess_h is not None else _fd_hess(f, pts, cfg.fd_step2)
    if not np.all(np.isfinite(h)):
        raise ValueError("non-finite horizontal Hessian")
    return h


def sym_eig2(H: np.ndarray):
    """(lambda_min, lambda_max) of symmetric (..., 2, 2) matrices, closed form."""
    a11, a12, a22 = H[..., 0, 0], H[..., 0, 1], H[..., 1, 1]
    mean = 0.5 * (a11 + a22)
    dev = np.hypot(0.5 * (a11 - a22), a12)
    return mean - dev, mean + dev


def quad_form(H: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """<H eta, eta> for (..., 2, 2) matrices and (..., 2) vectors."""
    e1, e2 = eta[..., 0], eta[..., 1]
    return (
        H[..., 0, 0] * e1 * e1
        + 2.0 * H[..., 0, 1] * e1 * e2
        + H[..., 1, 1] * e2 * e2
    )


def _char_mask(grad, H, cfg):
    gn = np.hypot(grad[..., 0], grad[..., 1])
    hmax = np.max(np.abs(H), axis=(-2, -1))
    return gn, gn <= cfg.grad_tol * (1.0 + hmax)


def _perp_value(grad, H):
    g1, g2 = grad[..., 0], grad[..., 1]
    n2 = g1 * g1 + g2 * g2
    n2 = np.where(n2 == 0.0, 1.0, n2)  # masked out by caller
    return (H[..., 0, 0] * g2 * g2 - 2.0 * H[..., 0, 1] * g1 * g2 + H[..., 1, 1] * g1 * g1) / n2


def op_L(f: ScalarField, pts, cfg: OperatorConfig = DEFAULT_CFG) -> np.ndarray:
    """Hessian form on the gradient-perpendicular; min eigenvalue where the
    gradient vanishes (every unit direction is then admissible)."""
    pts = np.asarray(pts, dtype=float)
    g = hgrad(f, pts, cfg)
    H = hhess(f, pts, cfg)
    _, char = _char_mask(g, H, cfg)
    lam_min, _ = sym_eig2(H)
    return np.where(char, lam_min, _perp_value(g, H))


def op_L_star(f: ScalarField, pts, cfg: OperatorConfig = DEFAULT_CFG) -> np.ndarray:
    """Argument-relaxed envelope: max eigenvalue at characteristic points,
    identical to op_L elsewhere."""
    pts = np.asarray(pts, dtype=float)
    g = hgrad(f, pts, cfg)
    H = hhess(f, pts, cfg)
    _, char = _char_mask(g, H, cfg)
    _, lam_max = sym_eig2(H)
    return np.where(char, lam_max, _perp_value(g, H))


@dataclass(frozen=True)
class LimsupEstimate:
    value: float
    by_radius: tuple  # ((r, shell max), ...) largest radius first


def op_L_bar_estimate(f: ScalarField, p, cfg: OperatorConfig = DEFAULT_CFG) -> LimsupEstimate:
    """Sampled surrogate of limsup_{q -> p} L[f](q).

    Takes the max of op_L over quasi-uniform samples of shrinking gauge balls
    around p (center included, so the value never drops below op_L(f, p));
    the reported value is the max at the smallest radius, and the whole radius
    sequence is kept for convergence inspection. This is an approximation of
    an upper limit, not a certified bound.
    """
    p = np.asarray(p, dtype=float)
    by_radius = []
    for r in cfg.limsup_radii:
        shell = sampling.gauge_ball_shell(p, r, cfg.limsup_samples)
        pts = np.concatenate([p[None, :], shell], axis=0)
        by_radius.append((r, float(np.max(op_L(f, pts, cfg)))))
    return LimsupEstimate(value=by_radius[-1][1], by_radius=tuple(by_radius))


def op_L_bar(f: ScalarField, p, cfg: OperatorConfig = DEFAULT_CFG) -> float:
    return op_L_bar_estimate(f, p, cfg).value


def op_L_rotsym(g: ProfileFunction, r, z) -> np.ndarray:
    """Closed form of op_L for f = x^2 + y^2 - g(z) at cylinder radius r."""
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be >= 0")
    dg = g.deriv(z)
    d2g = g.deriv2(z)
    return np.where(r == 0.0, 2.0, 2.0 - 4.0 * r * r * d2g / (16.0 + dg * dg))


def op_L_Frhoz(spec: FRhoZ, rho, z) -> np.ndarray:
    """Closed form of op_L for f = F(x^2 + y^2, z), valid off the set where
    both partials of F vanish."""
    if not spec.has_second:
        raise ValueError("need all first and second partials of F")
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be >= 0")
    fr, fz = spec.F_rho(rho, z), spec.F_z(rho, z)
    denom = fz * fz + 16.0 * fr * fr
    if np.any(denom == 0.0):
        raise ValueError("both partials of F vanish; closed form undefined")
    num = spec.F_rhorho(rho, z) * fz * fz - 2.0 * spec.F_rhoz(rho, z) * fr * fz + spec.F_zz(rho, z) * fr * fr
    return 2.0 * fr + 4.0 * rho * num / denom


def op_F(xi, H) -> float:
    """Horizontal curvature operator -tr((I - xi xi^T/|xi|^2) H); rejects
    xi = 0 (its semicontinuous envelopes are out of scope here)."""
    xi = np.asarray(xi, dtype=float)
    if isinstance(H, HessianSym2):
        H = H.as_matrix()
    H = np.asarray(H, dtype=float)
    n2 = float(xi[0] * xi[0] + xi[1] * xi[1])
    if n2 == 0.0:
        raise ValueError("curvature operator undefined at xi = 0")
    eta = np.array([-xi[1], xi[0]]) / np.sqrt(n2)
    return -float(quad_form(H, eta))


def operator_report(f: ScalarField, pts, cfg: OperatorConfig = DEFAULT_CFG):
    """Rows (x, y, z, |grad|, L, L*, Lbar) for CSV-facing callers."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    g = hgrad(f, pts, cfg)
    gn = np.hypot(g[..., 0], g[..., 1])
    L = op_L(f, pts, cfg)
    Ls = op_L_star(f, pts, cfg)
    Lb = np.array([op_L_bar(f, p, cfg) for p in pts])
    return np.column_stack([pts, gn, L, Ls, Lb])
