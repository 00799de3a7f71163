import numpy as np
import pytest

from hflow import fields, hcalc, hgroup
from hflow.hcalc import ANALYTIC_CFG, HessianSym2, OperatorConfig


def sample_points(n, lo=-2.0, hi=2.0, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, (n, 3))


# -- eigenvalues -------------------------------------------------------------


def test_hessian_eigenvalues_closed_form():
    h = HessianSym2(3.0, 1.0, -1.0)
    evs = np.linalg.eigvalsh(h.as_matrix())
    assert h.eig_min == pytest.approx(evs[0], abs=1e-12)
    assert h.eig_max == pytest.approx(evs[1], abs=1e-12)
    assert h.eig_min <= h.eig_max
    tr = h.eig_min + h.eig_max
    det = h.eig_min * h.eig_max
    assert tr == pytest.approx(h.a11 + h.a22, abs=1e-12)
    assert det == pytest.approx(h.a11 * h.a22 - h.a12**2, abs=1e-12)


def test_sym_eig2_batch_matches_numpy():
    rng = np.random.default_rng(2)
    m = rng.normal(size=(40, 2, 2))
    m = 0.5 * (m + np.swapaxes(m, -1, -2))
    lo, hi = hcalc.sym_eig2(m)
    ref = np.linalg.eigvalsh(m)
    assert np.allclose(lo, ref[:, 0], atol=1e-12)
    assert np.allclose(hi, ref[:, 1], atol=1e-12)


# -- gradients and Hessians --------------------------------------------------


def test_hgrad_examples():
    cfg = ANALYTIC_CFG
    f_sq = fields.field_rot_profile(fields.ProfileFunction(
        fn=lambda z: 0.0 * np.asarray(z), dfn=lambda z: 0.0 * np.asarray(z),
        d2fn=lambda z: 0.0 * np.asarray(z), name="zero"))
    assert np.allclose(hcalc.hgrad(f_sq, hgroup.point(1, 2, 0), cfg), [2, 4])
    f_pos = fields.field_positive_example()
    assert np.allclose(hcalc.hgrad(f_pos, hgroup.point(1, 0, 0), cfg), [2, 0])
    f_z4 = fields.field_neg_z4()
    assert np.allclose(hcalc.hgrad(f_z4, hgroup.point(1, 1, 0), cfg), [0, 0])


def test_hhess_examples():
    cfg = ANALYTIC_CFG
    f_pos = fields.field_positive_example()
    assert np.allclose(hcalc.hhess(f_pos, hgroup.point(1, 0, 2), cfg), [[2, 2], [2, 2]])
    f_z4 = fields.field_neg_z4()
    assert np.allclose(hcalc.hhess(f_z4, hgroup.point(1, 2, 1), cfg), [[-12, 6], [6, -3]])


def test_fd_convergence_order():
    # central differences on the group lines converge at second order
    f = fields.field_positive_example()
    fd = f.without_analytic()
    pts = sample_points(20, -1.5, 1.5, seed=4)
    g_exact = f.grad_h(pts)
    h_exact = f.hess_h(pts)
    steps = [1e-2, 5e-3, 2.5e-3]
    g_err, h_err = [], []
    for h in steps:
        cfg = OperatorConfig(fd_step=h, fd_step2=h)
        g_err.append(np.max(np.abs(hcalc.hgrad(fd, pts, cfg) - g_exact)))
        h_err.append(np.max(np.abs(hcalc.hhess(fd, pts, cfg) - h_exact)))
    for err in (g_err, h_err):
        orders = [np.log2(err[i] / err[i + 1]) for i in range(2) if err[i + 1] > 1e-14]
        assert all(o >= 1.8 for o in orders), (err, orders)


# -- the operator and its envelopes -----------------------------------------


def test_op_L_vanishes_for_neg_z4():
    f = fields.field_neg_z4()
    pts = sample_points(1000)
    assert np.max(np.abs(hcalc.op_L(f, pts, ANALYTIC_CFG))) <= 1e-9
    assert np.max(np.abs(hcalc.op_L_star(f, pts, ANALYTIC_CFG))) <= 1e-9


def test_op_L_rot_profile_on_axis():
    f = fields.field_rot_profile(fields.profile_quartic())
    on_axis = np.array([[0.0, 0.0, z] for z in np.linspace(-0.9, 0.9, 7)])
    vals = hcalc.op_L(f, on_axis, ANALYTIC_CFG)
    assert np.all(vals == 2.0)


def test_op_L_positive_example_value():
    f = fields.field_positive_example()
    assert hcalc.op_L(f, hgroup.point(1, 0, 0), ANALYTIC_CFG) == pytest.approx(2.0, abs=1e-12)


def test_op_L_star_branches():
    f = fields.field_positive_example()
    # characteristic point: max eigenvalue of [[2, Z], [Z, 0]]
    p = hgroup.point(0, 0, 0)
    assert hcalc.op_L_star(f, p, ANALYTIC_CFG) == pytest.approx(2.0, abs=1e-12)
    p = hgroup.point(0, 2, 1)
    expected = 1.0 + np.sqrt(1.0 + 1.0)
    assert hcalc.op_L_star(f, p, ANALYTIC_CFG) == pytest.approx(expected, abs=1e-12)
    # off the characteristic set both operators agree
    pts = sample_points(200, seed=9)
    pts = pts[np.abs(pts[:, 0]) > 1e-3]
    a = hcalc.op_L(f, pts, ANALYTIC_CFG)
    b = hcalc.op_L_star(f, pts, ANALYTIC_CFG)
    assert np.array_equal(a, b)


def test_op_ordering_L_below_L_star():
    for f in (fields.field_neg_z4(), fields.field_positive_example(),
              fields.field_rot_profile(fields.profile_quartic())):
        pts = sample_points(500, seed=11)
        assert np.all(hcalc.op_L(f, pts, ANALYTIC_CFG) <= hcalc.op_L_star(f, pts, ANALYTIC_CFG))


def test_op_L_bar_ordering_and_positivity():
    f = fields.field_positive_example()
    rng = np.random.default_rng(13)
    pts = rng.uniform(-1.5, 1.5, (25, 3))
    for p in pts:
        L = float(hcalc.op_L(f, p, ANALYTIC_CFG))
        Lb = hcalc.op_L_bar(f, p, ANALYTIC_CFG)
        Ls = float(hcalc.op_L_star(f, p, ANALYTIC_CFG))
        assert L <= Lb  # center point is in the sample set
        assert L <= Ls
        assert Lb <= Ls + 0.05  # shell radius slack at finite sampling
    # on the characteristic plane the upper limit stays nonnegative
    for y in (-1.0, 0.5, 2.0):
        assert hcalc.op_L_bar(f, hgroup.point(0.0, y, 0.7), ANALYTIC_CFG) >= -1e-6


def test_op_L_bar_smooth_point_consistency():
    f = fields.field_rot_profile(fields.profile_quartic())
    p = hgroup.point(0.5, 0.2, 0.1)
    est = hcalc.op_L_bar_estimate(f, p, ANALYTIC_CFG)
    L = float(hcalc.op_L(f, p, ANALYTIC_CFG))
    assert est.value == pytest.approx(L, abs=0.05)
    radii = [r for r, _ in est.by_radius]
    assert radii == sorted(radii, reverse=True)


def test_quad_form_sign_invariance_bitwise():
    rng = np.random.default_rng(3)
    H = rng.normal(size=(50, 2, 2))
    H = 0.5 * (H + np.swapaxes(H, -1, -2))
    eta = rng.normal(size=(50, 2))
    a = hcalc.quad_form(H, eta)
    b = hcalc.quad_form(H, -eta)
    assert np.array_equal(a, b)


def test_rotsym_closed_form_matches_direct():
    g = fields.profile_quartic()
    f = fields.field_rot_profile(g)
    rng = np.random.default_rng(21)
    pts = rng.uniform(-0.9, 0.9, (1000, 3))
    r = np.hypot(pts[:, 0], pts[:, 1])
    keep = r > 1e-3
    pts, r = pts[keep], r[keep]
    direct = hcalc.op_L(f, pts, ANALYTIC_CFG)
    closed = hcalc.op_L_rotsym(g, r, pts[:, 2])
    rel = np.abs(direct - closed) / (1.0 + np.abs(closed))
    assert np.max(rel) <= 1e-6


def test_rotsym_values():
    g = fields.profile_quartic()
    assert hcalc.op_L_rotsym(g, 0.0, 0.3) == 2.0
    lin = fields.profile_linear()
    vals = hcalc.op_L_rotsym(lin, np.array([0.5, 1.0]), np.array([0.2, -0.4]))
    assert np.allclose(vals, 2.0)
    # inside the quartic body the operator stays above twice the margin 1/2
    zs = np.linspace(-1, 1, 101)
    g_here = np.asarray(g.value(zs))
    for frac in (0.0, 0.5, 1.0):
        rr = np.sqrt(np.maximum(g_here, 0.0)) * frac
        assert np.all(hcalc.op_L_rotsym(g, rr, zs) > 1.0)


def test_frhoz_closed_form():
    g = fields.profile_quartic()
    spec = fields.FRhoZ(
        F=lambda rho, z: rho - g.value(z),
        F_rho=lambda rho, z: np.ones_like(rho),
        F_z=lambda rho, z: -g.deriv(z),
        F_rhorho=lambda rho, z: np.zeros_like(rho),
        F_rhoz=lambda rho, z: np.zeros_like(rho),
        F_zz=lambda rho, z: -g.deriv2(z),
    )
    rng = np.random.default_rng(5)
    rho = rng.uniform(0.01, 1.2, 200)
    z = rng.uniform(-0.9, 0.9, 200)
    a = hcalc.op_L_Frhoz(spec, rho, z)
    b = hcalc.op_L_rotsym(g, np.sqrt(rho), z)
    assert np.max(np.abs(a - b)) <= 1e-10

    const = fields.FRhoZ(
        F=lambda rho, z: rho,
        F_rho=lambda rho, z: np.ones_like(rho),
        F_z=lambda rho, z: np.zeros_like(rho),
        F_rhorho=lambda rho, z: np.zeros_like(rho),
        F_rhoz=lambda rho, z: np.zeros_like(rho),
        F_zz=lambda rho, z: np.zeros_like(rho),
    )
    assert hcalc.op_L_Frhoz(const, 0.3, 0.1) == pytest.approx(2.0, abs=1e-14)


def test_frhoz_fd_cross_check():
    # richer F exercising every second partial, against the finite-difference
    # operator evaluated on the corresponding field
    spec = fields.FRhoZ(
        F=lambda rho, z: rho + 0.25 * rho**2 + 0.1 * rho * z - 0.5 * z**2,
        F_rho=lambda rho, z: 1.0 + 0.5 * rho + 0.1 * z,
        F_z=lambda rho, z: 0.1 * rho - z,
        F_rhorho=lambda rho, z: 0.5 * np.ones_like(rho),
        F_rhoz=lambda rho, z: 0.1 * np.ones_like(rho),
        F_zz=lambda rho, z: -np.ones_like(rho),
        name="rich",
    )
    f = fields.field_F_rho_z(spec).without_analytic()
    rng = np.random.default_rng(17)
    pts = rng.uniform(-1.2, 1.2, (100, 3))
    rho = pts[:, 0] ** 2 + pts[:, 1] ** 2
    keep = rho > 1e-2
    pts, rho = pts[keep], rho[keep]
    cfg = OperatorConfig(fd_step=1e-4, fd_step2=1e-3, grad_tol=0.0)
    fd_vals = hcalc.op_L(f, pts, cfg)
    closed = hcalc.op_L_Frhoz(spec, rho, pts[:, 2])
    rel = np.abs(fd_vals - closed) / (1.0 + np.abs(closed))
    assert np.max(rel) <= 1e-4


def test_frhoz_rejects_degenerate():
    spec = fields.FRhoZ(
        F=lambda rho, z: 0.0 * rho,
        F_rho=lambda rho, z: 0.0 * rho,
        F_z=lambda rho, z: 0.0 * rho,
        F_rhorho=lambda rho, z: 0.0 * rho,
        F_rhoz=lambda rho, z: 0.0 * rho,
        F_zz=lambda rho, z: 0.0 * rho,
    )
    with pytest.raises(ValueError):
        hcalc.op_L_Frhoz(spec, np.array([0.5]), np.array([0.0]))


# -- curvature operator ------------------------------------------------------


def test_op_F_projection():
    assert hcalc.op_F(np.array([1.0, 0.0]), np.array([[5.0, 0.0], [0.0, 3.0]])) == -3.0
    assert hcalc.op_F(np.array([0.0, 1.0]), np.eye(2)) == -1.0
    assert hcalc.op_F((0.0, 2.0), HessianSym2(1.0, 0.0, 1.0)) == -1.0


def test_op_F_rejects_zero():
    with pytest.raises(ValueError):
        hcalc.op_F(np.zeros(2), np.eye(2))


def test_op_F_is_negated_op_L():
    f = fields.field_rot_profile(fields.profile_quartic())
    rng = np.random.default_rng(23)
    pts = rng.uniform(-0.8, 0.8, (50, 3))
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) > 0.05]
    grads = f.grad_h(pts)
    hessians = f.hess_h(pts)
    Ls = hcalc.op_L(f, pts, ANALYTIC_CFG)
    for g, H, L in zip(grads, hessians, Ls):
        assert hcalc.op_F(g, H) == pytest.approx(-L, abs=1e-12)


def test_necessary_condition_concave_profiles():
    # smooth uniformly h-quasiconvex fields keep the operator nonnegative
    for prof in (fields.profile_linear(),
                 fields.ProfileFunction(fn=lambda z: -np.asarray(z) ** 2,
                                        dfn=lambda z: -2 * np.asarray(z),
                                        d2fn=lambda z: -2 * np.ones_like(np.asarray(z)),
                                        name="concave-sq")):
        f = fields.field_rot_profile(prof)
        pts = sample_points(500, seed=31)
        assert np.min(hcalc.op_L(f, pts, ANALYTIC_CFG)) >= -1e-9


def test_operator_report_shape():
    f = fields.field_positive_example()
    rows = hcalc.operator_report(f, sample_points(5, seed=1), ANALYTIC_CFG)
    assert rows.shape == (5, 7)


def test_config_validation():
    with pytest.raises(ValueError):
        OperatorConfig(limsup_radii=(1e-3, 1e-2))
