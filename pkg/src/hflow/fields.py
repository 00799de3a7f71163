"""Scalar fields on the Heisenberg group.

A ScalarField wraps a vectorized evaluator f: (..., 3) -> (...) together with
optional analytic horizontal derivatives. The module also provides the named
example fields used throughout the test-suite and CLI, profile functions for
rotationally symmetric constructions, and grid-backed fields with trilinear
interpolation and constant extension outside the box.
"""

import csv
import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import _kernels, hgroup

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class ScalarField:
    """Evaluatable function H -> R with optional analytic derivatives.

    fn       : (..., 3) -> (...)
    grad_h   : (..., 3) -> (..., 2)   horizontal gradient (X1 f, X2 f)
    hess_h   : (..., 3) -> (..., 2, 2) symmetrized horizontal Hessian
    """

    fn: Callable[[np.ndarray], np.ndarray]
    grad_h: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess_h: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def __call__(self, pts) -> np.ndarray:
        return self.fn(np.asarray(pts, dtype=float))

    def without_analytic(self) -> "ScalarField":
        return ScalarField(fn=self.fn, name=self.name + "(fd)")


def _hess_matrix(a11, a12, a22) -> np.ndarray:
    row1 = np.stack([a11, a12], axis=-1)
    row2 = np.stack([a12, a22], axis=-1)
    return np.stack([row1, row2], axis=-2)


@dataclass(frozen=True)
class ProfileFunction:
    """Scalar profile g(z) with optional derivatives and a bounded domain.

    When endpoints a < 0 < b are set, evaluation outside [a, b] follows the
    chosen extension ("quadratic" Taylor from the nearest endpoint, endpoint
    "constant", or "none" to reject).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    dfn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d2fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    a: Optional[float] = None
    b: Optional[float] = None
    extension: str = "quadratic"
    name: str = ""

    @property
    def bounded(self) -> bool:
        return self.a is not None and self.b is not None

    def _ext_coeffs(self, at: float):
        if self.dfn is None or self.d2fn is None:
            raise ValueError(f"profile {self.name!r}: quadratic extension needs g', g''")
        return float(self.fn(np.float64(at))), float(self.dfn(np.float64(at))), float(self.d2fn(np.float64(at)))

    def _piecewise(self, z, inside, at_a, at_b):
        z = np.asarray(z, dtype=float)
        if not self.bounded:
            return inside(z)
        lo, hi = self.a, self.b
        if self.extension == "none":
            if np.any(z < lo) or np.any(z > hi):
                raise ValueError(f"profile {self.name!r} evaluated outside [{lo}, {hi}]")
            return inside(z)
        zc = np.clip(z, lo, hi)
        out = np.asarray(inside(zc), dtype=float).copy()
        below, above = z < lo, z > hi
        if np.any(below):
            out = np.where(below, at_a(z), out)
        if np.any(above):
            out = np.where(above, at_b(z), out)
        return out

    def value(self, z) -> np.ndarray:
        if self.extension == "constant" and self.bounded:
            ga = float(self.fn(np.float64(self.a)))
            gb = float(self.fn(np.float64(self.b)))
            return self._piecewise(z, self.fn, lambda t: ga + 0 * t, lambda t: gb + 0 * t)
        if self.bounded and self.extension == "quadratic":
            ga, da, d2a = self._ext_coeffs(self.a)
            gb, db, d2b = self._ext_coeffs(self.b)
            return self._piecewise(
                z,
                self.fn,
                lambda t: ga + da * (t - self.a) + 0.5 * d2a * (t - self.a) ** 2,
                lambda t: gb + db * (t - self.b) + 0.5 * d2b * (t - self.b) ** 2,
            )
        return self._piecewise(z, self.fn, None, None)

    def deriv(self, z) -> np.ndarray:
        if self.dfn is None:
            raise ValueError(f"profile {self.name!r} has no first derivative")
        if self.bounded and self.extension == "quadratic":
            _, da, d2a = self._ext_coeffs(self.a)
            _, db, d2b = self._ext_coeffs(self.b)
            return self._piecewise(
                z,
                self.dfn,
                lambda t: da + d2a * (t - self.a),
                lambda t: db + d2b * (t - self.b),
            )
        if self.bounded and self.extension == "constant":
            return self._piecewise(z, self.dfn, lambda t: 0.0 * t, lambda t: 0.0 * t)
        return self._piecewise(z, self.dfn, None, None)

    def deriv2(self, z) -> np.ndarray:
        if self.d2fn is None:
            raise ValueError(f"profile {self.name!r} has no second derivative")
        if self.bounded and self.extension == "quadratic":
            _, _, d2a = self._ext_coeffs(self.a)
            _, _, d2b = self._ext_coeffs(self.b)
            return self._piecewise(
                z, self.d2fn, lambda t: d2a + 0 * t, lambda t: d2b + 0 * t
            )
        if self.bounded and self.extension == "constant":
            return self._piecewise(z, self.d2fn, lambda t: 0.0 * t, lambda t: 0.0 * t)
        return self._piecewise(z, self.d2fn, None, None)


# ---------------------------------------------------------------------------
# named example fields
# ---------------------------------------------------------------------------


def field_neg_z4() -> ScalarField:
    """f(x,y,z) = -z^4; smooth, not h-quasiconvex, with L = L* = 0 everywhere."""

    def fn(p):
        return -p[..., 2] ** 4

    def grad(p):
        y, x, z = p[..., 1], p[..., 0], p[..., 2]
        half_dg = -2.0 * z**3  # g'(z)/2 with g(t) = -t^4
        return np.stack([half_dg * (-y), half_dg * x], axis=-1)

    def hess(p):
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        q = -3.0 * z**2  # g''(z)/4
        return _hess_matrix(q * y * y, -q * x * y, q * x * x)

    return ScalarField(fn, grad, hess, name="neg-z4")


def field_positive_example() -> ScalarField:
    """f(x,y,z) = x^2 + (z + xy/2)^2; positive envelope operators yet not
    h-quasiconvex, with no local maxima."""

    def _Z(p):
        return p[..., 2] + 0.5 * p[..., 0] * p[..., 1]

    def fn(p):
        return p[..., 0] ** 2 + _Z(p) ** 2

    def grad(p):
        x = p[..., 0]
        return np.stack([2.0 * x, 2.0 * x * _Z(p)], axis=-1)

    def hess(p):
        x = p[..., 0]
        Z = _Z(p)
        return _hess_matrix(2.0 + 0.0 * x, Z, 2.0 * x * x)

    return ScalarField(fn, grad, hess, name="positive-example")


def field_rot_profile(g: ProfileFunction) -> ScalarField:
    """Rotationally symmetric field f = x^2 + y^2 - g(z)."""

    def fn(p):
        return p[..., 0] ** 2 + p[..., 1] ** 2 - g.value(p[..., 2])

    grad = hess = None
    if g.dfn is not None:

        def grad(p):
            x, y, z = p[..., 0], p[..., 1], p[..., 2]
            dg = g.deriv(z)
            return np.stack([2 * x + 0.5 * y * dg, 2 * y - 0.5 * x * dg], axis=-1)

    if g.d2fn is not None:

        def hess(p):
            x, y, z = p[..., 0], p[..., 1], p[..., 2]
            q = 0.25 * g.deriv2(z)
            return _hess_matrix(2.0 - q * y * y, q * x * y, 2.0 - q * x * x)

    return ScalarField(fn, grad, hess, name=f"rot-profile[{g.name}]")


@dataclass(frozen=True)
class FRhoZ:
    """F(rho, z) with the partial derivatives needed for closed-form operators."""

    F: Callable
    F_rho: Optional[Callable] = None
    F_z: Optional[Callable] = None
    F_rhorho: Optional[Callable] = None
    F_rhoz: Optional[Callable] = None
    F_zz: Optional[Callable] = None
    name: str = ""

    @property
    def has_first(self):
        return self.F_rho is not None and self.F_z is not None

    @property
    def has_second(self):
        return self.has_first and None not in (self.F_rhorho, self.F_rhoz, self.F_zz)


def field_F_rho_z(spec: FRhoZ) -> ScalarField:
    """Field f(x,y,z) = F(x^2 + y^2, z) with analytic derivatives when the
    partials of F are supplied."""

    def fn(p):
        return spec.F(p[..., 0] ** 2 + p[..., 1] ** 2, p[..., 2])

    grad = hess = None
    if spec.has_first:

        def grad(p):
            x, y, z = p[..., 0], p[..., 1], p[..., 2]
            rho = x * x + y * y
            fr, fz = spec.F_rho(rho, z), spec.F_z(rho, z)
            return np.stack(
                [2 * x * fr - 0.5 * y * fz, 2 * y * fr + 0.5 * x * fz], axis=-1
            )

    if spec.has_second:

        def hess(p):
            x, y, z = p[..., 0], p[..., 1], p[..., 2]
            rho = x * x + y * y
            fr, fz = spec.F_rho(rho, z), spec.F_z(rho, z)
            frr, frz, fzz = (
                spec.F_rhorho(rho, z),
                spec.F_rhoz(rho, z),
                spec.F_zz(rho, z),
            )
            a11 = 2 * fr + 4 * x * x * frr - 2 * x * y * frz + 0.25 * y * y * fzz
            a22 = 2 * fr + 4 * y * y * frr + 2 * x * y * frz + 0.25 * x * x * fzz
            a12 = 4 * x * y * frr + (x * x - y * y) * frz - 0.25 * x * y * fzz
            return _hess_matrix(a11, a12, a22)

    return ScalarField(fn, grad, hess, name=f"F-rho-z[{spec.name}]")


# ---------------------------------------------------------------------------
# stock profiles
# ---------------------------------------------------------------------------


def profile_linear() -> ProfileFunction:
    return ProfileFunction(
        fn=lambda z: np.asarray(z, dtype=float),
        dfn=lambda z: np.ones_like(np.asarray(z, dtype=float)),
        d2fn=lambda z: np.zeros_like(np.asarray(z, dtype=float)),
        name="linear",
    )


def profile_semiconcave(c1: float) -> ProfileFunction:
    """g(z) = (c1/2) z^2; second derivative exactly c1 (tight semiconcavity)."""
    return ProfileFunction(
        fn=lambda z: 0.5 * c1 * np.asarray(z, dtype=float) ** 2,
        dfn=lambda z: c1 * np.asarray(z, dtype=float),
        d2fn=lambda z: c1 * np.ones_like(np.asarray(z, dtype=float)),
        name=f"semiconcave[{c1}]",
    )


def profile_quartic() -> ProfileFunction:
    """g(z) = (1 - z^2)(1 + 2 z^2) on [-1, 1]; h-convex body of revolution
    that is not Euclidean-convex."""
    return ProfileFunction(
        fn=lambda z: (1 - np.asarray(z, dtype=float) ** 2)
        * (1 + 2 * np.asarray(z, dtype=float) ** 2),
        dfn=lambda z: 2 * np.asarray(z, dtype=float) - 8 * np.asarray(z, dtype=float) ** 3,
        d2fn=lambda z: 2 - 24 * np.asarray(z, dtype=float) ** 2,
        a=-1.0,
        b=1.0,
        name="quartic",
    )


def profile_gauge_ball() -> ProfileFunction:
    """g(z) = sqrt(1 - 16 z^2) on [-1/4, 1/4]: the unit gauge ball as a body
    of revolution. The slope blows up at the endpoints, so only the constant
    extension is available."""

    def fn(z):
        z = np.asarray(z, dtype=float)
        return np.sqrt(np.maximum(1.0 - 16.0 * z * z, 0.0))

    def dfn(z):
        z = np.asarray(z, dtype=float)
        g = np.sqrt(np.maximum(1.0 - 16.0 * z * z, 1e-300))
        return -16.0 * z / g

    def d2fn(z):
        z = np.asarray(z, dtype=float)
        g = np.sqrt(np.maximum(1.0 - 16.0 * z * z, 1e-300))
        return -16.0 / g**3

    return ProfileFunction(fn, dfn, d2fn, a=-0.25, b=0.25, extension="constant", name="gauge-ball")


# ---------------------------------------------------------------------------
# grid-backed fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bounds:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3 or any(h <= l for l, h in zip(lo, hi)):
            raise ValueError(f"invalid bounds {lo} .. {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def axes(self, dims):
        return [np.linspace(self.lo[i], self.hi[i], dims[i]) for i in range(3)]

    def to_json(self):
        return {"lo": list(self.lo), "hi": list(self.hi)}


_SNAP = 1e-12


@dataclass(frozen=True)
class GridSlice:
    """Node values on a rectilinear lattice, trilinear inside the box and a
    constant outside. Values are immutable after construction.

    The interpolated value is clamped to the min/max of its 8-node stencil,
    which makes the convex-combination and monotonicity properties hold
    bit-for-bit, not just up to rounding.
    """

    bounds: Bounds
    dims: tuple
    values: np.ndarray
    outside_value: float

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if any(d < 2 for d in dims):
            raise ValueError("need at least 2 nodes per axis")
        vals = np.asarray(self.values, dtype=float).reshape(dims)
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "outside_value", float(self.outside_value))

    @property
    def cell_sizes(self):
        return tuple(
            (self.bounds.hi[i] - self.bounds.lo[i]) / (self.dims[i] - 1)
            for i in range(3)
        )

    def node_axes(self):
        return self.bounds.axes(self.dims)

    def node_points(self) -> np.ndarray:
        ax = self.node_axes()
        X, Y, Z = np.meshgrid(*ax, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    def eval(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        scalar = pts.ndim == 1
        p = np.ascontiguousarray(pts.reshape(-1, 3))
        if _kernels.HAVE_NUMBA and p.shape[0] >= 512:
            out = _kernels.interp_batch(
                self.values,
                np.array(self.bounds.lo),
                np.array(self.bounds.hi),
                np.array(self.cell_sizes),
                self.outside_value,
                p,
            )
            out = out.reshape(pts.shape[:-1])
            return float(out) if scalar else out
        out = np.full(p.shape[0], self.outside_value)
        inside = np.ones(p.shape[0], dtype=bool)
        for ax in range(3):
            inside &= (p[:, ax] >= self.bounds.lo[ax]) & (p[:, ax] <= self.bounds.hi[ax])
        if np.any(inside):
            q = p[inside]
            idx, frac = [], []
            for ax in range(3):
                n = self.dims[ax]
                h = (self.bounds.hi[ax] - self.bounds.lo[ax]) / (n - 1)
                u = (q[:, ax] - self.bounds.lo[ax]) / h
                i = np.clip(np.floor(u).astype(np.int64), 0, n - 2)
                t = u - i
                t = np.where(t < _SNAP, 0.0, np.where(t > 1.0 - _SNAP, 1.0, t))
                t = np.clip(t, 0.0, 1.0)
                idx.append(i)
                frac.append(t)
            i, j, k = idx
            tx, ty, tz = frac
            v = self.values
            acc = np.zeros(q.shape[0])
            lo = np.full(q.shape[0], np.inf)
            hi = np.full(q.shape[0], -np.inf)
            for di, wx in ((0, 1.0 - tx), (1, tx)):
                for dj, wy in ((0, 1.0 - ty), (1, ty)):
                    for dk, wz in ((0, 1.0 - tz), (1, tz)):
                        corner = v[i + di, j + dj, k + dk]
                        acc = acc + (wx * wy * wz) * corner
                        lo = np.minimum(lo, corner)
                        hi = np.maximum(hi, corner)
            out[inside] = np.minimum(np.maximum(acc, lo), hi)
        out = out.reshape(pts.shape[:-1])
        return float(out) if scalar else out

    def as_field(self, name: str = "") -> ScalarField:
        return ScalarField(fn=self.eval, name=name or "grid-slice")

    def with_values(self, values) -> "GridSlice":
        return GridSlice(self.bounds, self.dims, values, self.outside_value)

    # -- serialization: JSON header + CSV of node values, x varying fastest --

    def save(self, stem) -> None:
        stem = Path(stem)
        header = {
            "bounds": self.bounds.to_json(),
            "dims": list(self.dims),
            "outside_value": self.outside_value,
            "values_csv": stem.name + ".csv",
            "order": "x-fastest",
        }
        stem.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True))
        flat = self.values.ravel(order="F")
        with open(stem.with_suffix(".csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["value"])
            for val in flat:
                w.writerow([FLOAT_FMT % val])

    @classmethod
    def load(cls, stem) -> "GridSlice":
        stem = Path(stem)
        header = json.loads(stem.with_suffix(".json").read_text())
        with open(stem.parent / header["values_csv"], newline="") as fh:
            rows = list(csv.reader(fh))
        flat = np.array([float(r[0]) for r in rows[1:]])
        dims = tuple(header["dims"])
        vals = flat.reshape(dims, order="F")
        return cls(
            Bounds(tuple(header["bounds"]["lo"]), tuple(header["bounds"]["hi"])),
            dims,
            vals,
            header["outside_value"],
        )


def grid_sample(f: ScalarField, bounds: Bounds, dims, outside_value: float) -> GridSlice:
    dims = tuple(int(d) for d in dims)
    if any(d < 2 for d in dims):
        raise ValueError("need at least 2 nodes per axis")
    ax = bounds.axes(dims)
    X, Y, Z = np.meshgrid(*ax, indexing="ij")
    pts = np.stack([X, Y, Z], axis=-1)
    vals = f(pts)
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(np.asarray(vals)))
        raise ValueError(f"non-finite sample at node index {tuple(bad[0])}")
    return GridSlice(bounds, dims, vals, outside_value)


def grid_eval(s: GridSlice, p) -> np.ndarray:
    return s.eval(p)
