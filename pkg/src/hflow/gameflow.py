"""Min-max dynamic-programming solver for level-set horizontal curvature flow.

One step of the scheme replaces the value at every lattice node p by

    min over direction angles theta  of  max over b = +/-1  of
        u(p . sqrt(2) eps b v_theta)

where off-lattice values come from trilinear interpolation with the constant
truncation level outside the box. A step advances time by eps^2. The same
recursion evaluated exactly on a scalar field (no lattice) is available as a
brute-force oracle for small step counts.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import _kernels, hgroup, qcheck
from .fields import Bounds, GridSlice, ScalarField, grid_sample

ORACLE_LEAF_CAP = 5_000_000


@dataclass(frozen=True)
class GameParams:
    """Step size eps (one step = eps^2 time), direction count, horizon,
    truncation level, and the lattice."""

    epsilon: float
    directions: int
    horizon: float
    truncation: float
    bounds: Bounds
    dims: tuple

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.directions < 4:
            raise ValueError("need at least 4 direction angles")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def n_steps(self) -> int:
        # floor(T / eps^2); the 1e-9 shields exact multiples from FP noise
        return int(math.floor(self.horizon / self.epsilon**2 + 1e-9))

    @property
    def move_length(self) -> float:
        return math.sqrt(2.0) * self.epsilon

    @property
    def thetas(self) -> np.ndarray:
        m = self.directions
        return np.pi * np.arange(m) / m

    @property
    def max_cell(self) -> float:
        return max(
            (self.bounds.hi[i] - self.bounds.lo[i]) / (self.dims[i] - 1)
            for i in range(3)
        )

    @property
    def move_to_cell_ratio(self) -> float:
        return self.move_length / self.max_cell

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "directions": self.directions,
            "horizon": self.horizon,
            "truncation": self.truncation,
            "bounds": self.bounds.to_json(),
            "dims": list(self.dims),
            "n_steps": self.n_steps,
            "move_to_cell_ratio": self.move_to_cell_ratio,
        }


def interp_allowance(params: GameParams, steps: int) -> float:
    """Interpolation slack granted to order-type checks across `steps` steps."""
    return 4.0 * params.max_cell * max(1, steps)


@dataclass(frozen=True)
class FlowResult:
    slices: list  # GridSlice per time level, slices[0] = initial data
    params: GameParams
    diagnostics: list  # per-level dict of min/max/capped fraction

    @property
    def times(self) -> list:
        return [k * self.params.epsilon**2 for k in range(len(self.slices))]


def _set_threads(threads: Optional[int]) -> None:
    if threads and _kernels.HAVE_NUMBA:
        import numba

        numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))


def dpp_step(prev: GridSlice, params: GameParams,
             threads: Optional[int] = None, force_numpy: bool = False) -> GridSlice:
    """One dynamic-programming update of the whole lattice.

    The numba kernel and the numpy fallback perform the same floating-point
    operations in the same order, so their outputs are bit-identical and
    independent of the worker schedule (each node is a pure function of the
    previous slice).
    """
    if not np.all(np.isfinite(prev.values)):
        raise ValueError("non-finite values in previous slice")
    ax = prev.node_axes()
    length = params.move_length
    cos_t = np.cos(params.thetas)
    sin_t = np.sin(params.thetas)

    if _kernels.HAVE_NUMBA and not force_numpy:
        _set_threads(threads)
        vals = _kernels.dpp_step_kernel(
            prev.values,
            np.array(prev.bounds.lo),
            np.array(prev.bounds.hi),
            np.array(prev.cell_sizes),
            prev.outside_value,
            ax[0], ax[1], ax[2],
            cos_t, sin_t, length,
        )
        return prev.with_values(vals)

    X, Y, Z = np.meshgrid(*ax, indexing="ij")

    def direction_max(k: int) -> np.ndarray:
        dx = length * cos_t[k]
        dy = length * sin_t[k]
        dz = 0.5 * length * (X * sin_t[k] - Y * cos_t[k])
        plus = np.stack([X + dx, Y + dy, Z + dz], axis=-1)
        minus = np.stack([X - dx, Y - dy, Z - dz], axis=-1)
        return np.maximum(prev.eval(plus), prev.eval(minus))

    ks = list(range(params.directions))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            maxes = list(pool.map(direction_max, ks))
    else:
        maxes = [direction_max(k) for k in ks]
    best = maxes[0]
    for m in maxes[1:]:  # fixed reduction order keeps runs bit-reproducible
        best = np.minimum(best, m)
    return prev.with_values(best)


def solve(u0: GridSlice, params: GameParams,
          threads: Optional[int] = None) -> FlowResult:
    """Iterate dpp_step for floor(horizon / eps^2) steps, keeping every level."""
    if np.any(u0.values > params.truncation):
        raise ValueError("initial slice exceeds the truncation level")
    if u0.outside_value != params.truncation:
        raise ValueError("initial slice must extend with the truncation level")
    slices = [u0]
    diagnostics = [_slice_diag(u0, params)]
    for _ in range(params.n_steps):
        nxt = dpp_step(slices[-1], params, threads)
        slices.append(nxt)
        diagnostics.append(_slice_diag(nxt, params))
    return FlowResult(slices=slices, params=params, diagnostics=diagnostics)


def _slice_diag(s: GridSlice, params: GameParams) -> dict:
    v = s.values
    return {
        "min": float(np.min(v)),
        "max": float(np.max(v)),
        "capped_fraction": float(np.mean(v >= params.truncation - 1e-12)),
    }


def sample_initial(f: ScalarField, params: GameParams) -> GridSlice:
    """Sample min(f, C) on the lattice with outside value C."""
    C = params.truncation
    clipped = ScalarField(fn=lambda pts: np.minimum(f(pts), C), name=f.name + "^C")
    return grid_sample(clipped, params.bounds, params.dims, C)


def dpp_oracle(u0: ScalarField, p, n_steps: int, params: GameParams) -> float:
    """Exact recursive min-max value at a single point: expands the full
    (2 M)^N tree of group moves and evaluates the terminal cost there, with no
    lattice and no interpolation."""
    m = params.directions
    leaves = (2 * m) ** n_steps
    if leaves > ORACLE_LEAF_CAP:
        raise ValueError(f"oracle tree too large: (2*{m})^{n_steps} = {leaves}")
    pts = np.asarray(p, dtype=float).reshape(1, 3)
    length = params.move_length
    thetas = params.thetas
    for _ in range(n_steps):
        x, y, z = pts[:, 0:1], pts[:, 1:2], pts[:, 2:3]
        dx, dy, dz = hgroup.step_offsets(x, y, thetas[None, :], length)
        plus = np.stack([x + dx, y + dy, z + dz], axis=-1)
        minus = np.stack([x - dx, y - dy, z - dz], axis=-1)
        # leaf order: (..., theta, b); reductions later peel from the right
        pts = np.stack([plus, minus], axis=2).reshape(-1, 3)
    vals = np.asarray(u0(pts), dtype=float)
    for _ in range(n_steps):
        vals = vals.reshape(-1, 2).max(axis=1)
        vals = vals.reshape(-1, m).min(axis=1)
    return float(vals[0])


def check_time_monotonicity(res: FlowResult, lam: float,
                            exclude_capped: bool = True) -> dict:
    """Worst margin of u(., l) - u(., k) - 2 lam eps^2 (l - k) over node/time
    pairs, with and without the configured interpolation allowance.

    Nodes already at the truncation level at the later time are excluded by
    default when lam > 0: the clamped value provably stalls there while the
    unclamped one keeps growing, so the rate statement concerns the
    below-plateau region.
    """
    eps2 = res.params.epsilon ** 2
    C = res.params.truncation
    worst_raw = np.inf
    worst_allowed = np.inf
    n = len(res.slices)
    for k in range(n - 1):
        vk = res.slices[k].values
        for l in range(k + 1, n):
            vl = res.slices[l].values
            margin = vl - vk - 2.0 * lam * eps2 * (l - k)
            if exclude_capped and lam > 0:
                mask = vl < C - 1e-12
                if not np.any(mask):
                    continue
                m = float(np.min(margin[mask]))
            else:
                m = float(np.min(margin))
            worst_raw = min(worst_raw, m)
            worst_allowed = min(
                worst_allowed, m + interp_allowance(res.params, l - k)
            )
    return {"worst_margin": worst_raw, "worst_margin_with_allowance": worst_allowed}


def check_truncation_commute(u_hat0: ScalarField, C: float, p, n_steps: int,
                             params: GameParams) -> float:
    """|game(min(u,C)) - min(game(u), C)| at a point, via the exact oracle.

    Clamping commutes with every min/max in the tree, so the difference is
    exactly zero; any nonzero value signals an implementation fault.
    """
    clipped = ScalarField(fn=lambda pts: np.minimum(u_hat0(pts), C))
    a = dpp_oracle(clipped, p, n_steps, params)
    b = min(dpp_oracle(u_hat0, p, n_steps, params), C)
    return abs(a - b)


def check_slice_hqc(res: FlowResult, plan: qcheck.SamplingPlan) -> list:
    """Largest sampled quasiconvexity gap per time level (0.0 when the search
    finds no violation above its tolerance)."""
    gaps = []
    for s in res.slices:
        witness = qcheck.search_violation(s.as_field(), plan)
        gaps.append(witness.gap if witness is not None else 0.0)
    return gaps


def zero_level_cloud(s: GridSlice) -> np.ndarray:
    """Sign-change crossings of the zero level along lattice edges, linearly
    interpolated; an (N, 3) point cloud for external plotting."""
    ax = s.node_axes()
    v = s.values
    pts = []
    for axis in range(3):
        a = v
        sl_lo = [slice(None)] * 3
        sl_hi = [slice(None)] * 3
        sl_lo[axis] = slice(0, -1)
        sl_hi[axis] = slice(1, None)
        lo, hi = a[tuple(sl_lo)], a[tuple(sl_hi)]
        cross = (lo * hi < 0.0) | ((lo == 0.0) & (hi != 0.0))
        idx = np.argwhere(cross)
        if idx.size == 0:
            continue
        lo_v = lo[cross]
        hi_v = hi[cross]
        t = lo_v / (lo_v - hi_v)
        coords = []
        for d in range(3):
            c = ax[d][idx[:, d]]
            if d == axis:
                step = ax[d][1] - ax[d][0]
                c = c + t * step
            coords.append(c)
        pts.append(np.stack(coords, axis=-1))
    if not pts:
        return np.zeros((0, 3))
    return np.concatenate(pts, axis=0)
