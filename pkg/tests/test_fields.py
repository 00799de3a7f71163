import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from hflow import fields, hgroup
from hflow.fields import Bounds, GridSlice, grid_sample


# -- named fields ------------------------------------------------------------


def test_neg_z4_values():
    f = fields.field_neg_z4()
    assert f(hgroup.point(1, 2, 1)) == -1.0
    assert f(hgroup.point(1, 0, 0)) == 0.0
    assert np.allclose(f.grad_h(hgroup.point(0, 0, 1)), [0, 0])


def test_neg_z4_hessian():
    f = fields.field_neg_z4()
    h = f.hess_h(hgroup.point(1, 2, 1))
    assert np.allclose(h, [[-12, 6], [6, -3]])


def test_positive_example_values():
    f = fields.field_positive_example()
    assert f(hgroup.point(0, 0, 1)) == 1.0
    assert f(hgroup.point(-0.1, 1, 1)) == pytest.approx(0.9125, abs=1e-15)
    assert np.allclose(f.grad_h(hgroup.point(0, 5, 3)), [0, 0])
    h = f.hess_h(hgroup.point(1, 0, 2))
    assert np.allclose(h, [[2, 2], [2, 2]])


def test_rot_profile_linear():
    f = fields.field_rot_profile(fields.profile_linear())
    assert f(hgroup.point(1, 1, 2)) == 0.0
    grad = f.grad_h(hgroup.point(0, 0, 3))
    assert np.allclose(grad, [0, 0])


def test_rot_profile_gradient_norm_identity():
    g = fields.profile_quartic()
    f = fields.field_rot_profile(g)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-0.9, 0.9, (100, 3))
    grad = f.grad_h(pts)
    norm = np.hypot(grad[:, 0], grad[:, 1])
    r = np.hypot(pts[:, 0], pts[:, 1])
    expected = 0.5 * r * np.sqrt(16.0 + np.asarray(g.deriv(pts[:, 2])) ** 2)
    assert np.max(np.abs(norm - expected)) <= 1e-12 * (1 + np.max(expected))


def test_f_rho_z_matches_rot_profile():
    g = fields.profile_quartic()
    spec = fields.FRhoZ(
        F=lambda rho, z: rho - g.value(z),
        F_rho=lambda rho, z: np.ones_like(rho + z),
        F_z=lambda rho, z: -g.deriv(z),
        F_rhorho=lambda rho, z: np.zeros_like(rho + z),
        F_rhoz=lambda rho, z: np.zeros_like(rho + z),
        F_zz=lambda rho, z: -g.deriv2(z),
        name="rho-minus-quartic",
    )
    f1 = fields.field_F_rho_z(spec)
    f2 = fields.field_rot_profile(g)
    rng = np.random.default_rng(8)
    pts = rng.uniform(-0.9, 0.9, (200, 3))
    assert np.max(np.abs(f1(pts) - f2(pts))) <= 1e-12
    assert np.max(np.abs(f1.grad_h(pts) - f2.grad_h(pts))) <= 1e-12
    assert np.max(np.abs(f1.hess_h(pts) - f2.hess_h(pts))) <= 1e-12


def test_f_rho_z_simple():
    spec = fields.FRhoZ(F=lambda rho, z: rho)
    f = fields.field_F_rho_z(spec)
    assert f(hgroup.point(1, 2, 5)) == 5.0
    spec2 = fields.FRhoZ(F=lambda rho, z: rho - z)
    assert fields.field_F_rho_z(spec2)(hgroup.point(1, 0, 1)) == 0.0


def test_analytic_derivatives_match_finite_differences():
    from hflow import hcalc

    h = 1e-3
    cfg = hcalc.OperatorConfig(fd_step=h, fd_step2=1e-2)
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1.5, 1.5, (50, 3))
    for f in (fields.field_neg_z4(), fields.field_positive_example(),
              fields.field_rot_profile(fields.profile_quartic())):
        fd = f.without_analytic()
        g_num = hcalc.hgrad(fd, pts, cfg)
        g_ana = f.grad_h(pts)
        scale = 1.0 + np.max(np.abs(g_ana))
        assert np.max(np.abs(g_num - g_ana)) / scale <= 1e-4
        h_num = hcalc.hhess(fd, pts, cfg)
        h_ana = f.hess_h(pts)
        scale = 1.0 + np.max(np.abs(h_ana))
        assert np.max(np.abs(h_num - h_ana)) / scale <= 1e-4


# -- profiles ----------------------------------------------------------------


def test_profile_quadratic_extension_is_c1():
    g = fields.profile_quartic()
    eps = 1e-7
    for z0 in (g.a, g.b):
        slope = abs(float(g.deriv(z0)))
        curv = abs(float(g.deriv2(z0)))
        inside = z0 - np.sign(z0) * eps
        outside = z0 + np.sign(z0) * eps
        dv = abs(float(g.value(inside)) - float(g.value(outside)))
        assert dv <= 2 * eps * slope + 1e-10
        dd = abs(float(g.deriv(inside)) - float(g.deriv(outside)))
        assert dd <= 2 * eps * curv + 1e-10


def test_profile_constant_extension():
    g = fields.profile_gauge_ball()
    assert float(g.value(0.3)) == 0.0
    assert float(g.value(0.0)) == 1.0


def test_profile_none_extension_raises():
    g = fields.ProfileFunction(fn=lambda z: 1.0 - z * z, a=-1.0, b=1.0, extension="none")
    with pytest.raises(ValueError):
        g.value(1.5)


# -- grid slices -------------------------------------------------------------


@pytest.fixture
def small_slice():
    b = Bounds((-1, -1, -1), (1, 1, 1))
    f = fields.ScalarField(fn=lambda p: p[..., 0] + 2 * p[..., 1] - p[..., 2])
    return grid_sample(f, b, (5, 6, 7), outside_value=9.0)


def test_grid_nodes_exact(small_slice):
    nodes = small_slice.node_points().reshape(-1, 3)
    vals = small_slice.eval(nodes)
    assert np.array_equal(vals, small_slice.values.ravel())


def test_grid_outside_constant(small_slice):
    assert small_slice.eval(hgroup.point(2, 0, 0)) == 9.0
    assert small_slice.eval(hgroup.point(0, 0, -1.0000001)) == 9.0


def test_trilinear_exact_on_linear_fields(small_slice):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, (500, 3))
    exact = pts[:, 0] + 2 * pts[:, 1] - pts[:, 2]
    assert np.max(np.abs(small_slice.eval(pts) - exact)) <= 1e-12


@given(st.integers(min_value=0, max_value=10**6))
@settings(max_examples=60)
def test_interpolation_is_convex_combination(seed):
    rng = np.random.default_rng(seed)
    b = Bounds((0, 0, 0), (1, 1, 1))
    vals = rng.normal(size=(3, 3, 3))
    s = GridSlice(b, (3, 3, 3), vals, outside_value=0.0)
    pts = rng.uniform(0, 1, (50, 3))
    out = s.eval(pts)
    assert np.all(out <= np.max(vals)) and np.all(out >= np.min(vals))


def test_interpolation_monotone_in_values():
    rng = np.random.default_rng(42)
    b = Bounds((0, 0, 0), (1, 1, 1))
    va = rng.normal(size=(4, 4, 4))
    vb = va + np.abs(rng.normal(size=(4, 4, 4)))
    sa = GridSlice(b, (4, 4, 4), va, outside_value=0.0)
    sb = GridSlice(b, (4, 4, 4), vb, outside_value=0.5)
    pts = rng.uniform(-0.2, 1.2, (2000, 3))
    assert np.all(sa.eval(pts) <= sb.eval(pts))


def test_clamp_commutes_within_tolerance():
    rng = np.random.default_rng(11)
    b = Bounds((0, 0, 0), (1, 1, 1))
    vals = rng.normal(size=(5, 5, 5))
    C = 0.2
    s = GridSlice(b, (5, 5, 5), vals, outside_value=C)
    s_min = GridSlice(b, (5, 5, 5), np.minimum(vals, C), outside_value=C)
    pts = rng.uniform(0, 1, (3000, 3))
    a = s_min.eval(pts)
    m = np.minimum(s.eval(pts), C)
    assert np.all(a <= m + 1e-12)
    # equality when the whole stencil sits on one side of C: test a region
    # where all values are far below C
    s2 = GridSlice(b, (5, 5, 5), vals - 10.0, outside_value=C)
    s2_min = GridSlice(b, (5, 5, 5), np.minimum(vals - 10.0, C), outside_value=C)
    assert np.array_equal(s2.eval(pts), s2_min.eval(pts))


def test_grid_slice_plateau_never_exceeded():
    rng = np.random.default_rng(1)
    b = Bounds((0, 0, 0), (1, 1, 1))
    C = 1.0
    vals = np.minimum(rng.normal(size=(4, 4, 4)) + 1.0, C)
    s = GridSlice(b, (4, 4, 4), vals, outside_value=C)
    pts = rng.uniform(-0.5, 1.5, (5000, 3))
    assert np.all(s.eval(pts) <= C)


def test_grid_sample_rejects_non_finite():
    b = Bounds((-1, -1, -1), (1, 1, 1))
    f = fields.ScalarField(fn=lambda p: 1.0 / (p[..., 0] - p[..., 0] + (np.abs(p[..., 0]) > 0.5)))
    with pytest.raises(ValueError, match="node index"):
        grid_sample(f, b, (5, 5, 5), 0.0)


def test_grid_slice_round_trip(tmp_path, small_slice):
    stem = tmp_path / "slice"
    small_slice.save(stem)
    back = GridSlice.load(stem)
    assert back.dims == small_slice.dims
    assert np.array_equal(back.values, small_slice.values)
    assert back.outside_value == small_slice.outside_value
    assert back.bounds.lo == small_slice.bounds.lo


def test_grid_slice_immutable(small_slice):
    with pytest.raises(ValueError):
        small_slice.values[0, 0, 0] = 99.0
