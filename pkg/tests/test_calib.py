import numpy as np
import pytest

from shapecal import calib
from shapecal.calib import (CalibConfig, Correspondence, assemble_cost,
                            build_rows, read_correspondences, residual_rms,
                            solve_barrel, solve_pincushion,
                            solve_unconstrained, solve_zero_crossing,
                            write_correspondences)
from shapecal.distortion import DistortionModel, shape_check

from util import common_root_mustache, pincushion_feasible, \
    synth_correspondences


def test_build_rows_zero_radius():
    A, b = build_rows((0.0, 0.0, 0.07, -0.02))
    assert np.allclose(A, 0.0)
    assert np.allclose(b, [-0.07, 0.02])


def test_build_rows_undistorted_point():
    A, b = build_rows((1.0, 0.0, 1.0, 0.0))
    assert np.allclose(b, 0.0)
    assert np.allclose(A @ np.zeros(6) - b, 0.0)


def test_build_rows_expansion_identity():
    # A_i k - b_i must reassemble to (g(r) xhat - f(r) x, g(r) yhat - f(r) y).
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, y, xh, yh = rng.normal(size=4)
        k = rng.normal(size=6) * 0.3
        A, b = build_rows((x, y, xh, yh))
        r = np.hypot(x, y)
        f = 1 + k[0] * r + k[1] * r ** 2 + k[2] * r ** 3
        g = 1 + k[3] * r + k[4] * r ** 2 + k[5] * r ** 3
        expected = np.array([g * xh - f * x, g * yh - f * y])
        assert np.allclose(A @ k - b, expected, atol=1e-12)


def test_assemble_cost_single_zero_row():
    cost = assemble_cost([(0.0, 0.0, 0.3, -0.1)])
    assert np.allclose(cost.M, 0.0)
    assert np.allclose(cost.m, 0.0)
    assert cost.c == pytest.approx(0.1, abs=1e-15)


def test_assemble_cost_doubling():
    data = synth_correspondences(
        DistortionModel("polynomial", (-0.1, 0, 0, 0, 0, 0)), (0.1, 1.0),
        n=40, seed=1)
    one = assemble_cost(data)
    two = assemble_cost(np.concatenate([data, data]))
    assert np.allclose(two.M, 2 * one.M)
    assert np.allclose(two.m, 2 * one.m)
    assert two.c == pytest.approx(2 * one.c)


def test_cost_matches_residual_sum():
    rng = np.random.default_rng(5)
    data = rng.normal(size=(100, 4))
    cost = assemble_cost(data)
    for _ in range(5):
        k = rng.normal(size=6) * 0.2
        direct = 0.0
        for row in data:
            A, b = build_rows(row)
            direct += float(((A @ k - b) ** 2).sum())
        assert cost.objective(k) == pytest.approx(direct, rel=1e-9)


def test_cost_matrix_psd():
    rng = np.random.default_rng(9)
    data = rng.normal(size=(50, 4))
    cost = assemble_cost(data)
    assert np.linalg.eigvalsh(cost.M)[0] >= -1e-10


def test_correspondence_radius_from_ideal():
    c = Correspondence(3.0, 4.0, 0.0, 0.0)
    assert c.radius == pytest.approx(5.0)


TRUE_RATIONAL = DistortionModel("rational",
                                (-0.15, 0.05, 0.02, -0.1, 0.04, 0.01))


def test_unconstrained_recovers_rational_generator():
    data = synth_correspondences(TRUE_RATIONAL, (0.05, 2.0), n=300, seed=2)
    res = solve_unconstrained(assemble_cost(data), "rational")
    assert res.solver_status == "optimal"
    assert np.abs(np.array(res.model.k) - TRUE_RATIONAL.k).max() <= 1e-5
    assert res.objective <= 1e-10


def test_unconstrained_identity_data():
    data = synth_correspondences(DistortionModel.identity(), (0.1, 1.0),
                                 n=50, seed=3)
    res = solve_unconstrained(assemble_cost(data), "rational")
    assert np.abs(res.model.k).max() <= 1e-6
    assert res.objective <= 1e-12


def test_unconstrained_rank_deficient_matches_pseudoinverse():
    # All points at one radius: M is singular; objectives must still agree.
    rng = np.random.default_rng(6)
    theta = rng.uniform(0, 2 * np.pi, size=60)
    r = 0.8
    x, y = r * np.cos(theta), r * np.sin(theta)
    scale = 0.93
    data = np.stack([x, y, scale * x, scale * y], axis=1)
    cost = assemble_cost(data)
    res = solve_unconstrained(cost, "polynomial")
    Mr = cost.M[:3, :3]
    mr = cost.m[:3]
    k_pinv = np.linalg.pinv(Mr) @ (-0.5 * mr)
    obj_pinv = float(k_pinv @ Mr @ k_pinv + mr @ k_pinv + cost.c)
    assert res.objective == pytest.approx(obj_pinv, abs=1e-6)


def test_barrel_noiseless_recovery():
    true = DistortionModel("polynomial", (-0.1, -0.05, 0, 0, 0, 0))
    data = synth_correspondences(true, (0.02, 0.5), n=500, seed=4)
    cost = assemble_cost(data)
    cfg = CalibConfig(rbar=1.0, shape="barrel")
    res = solve_barrel(cost, cfg)
    unc = solve_unconstrained(cost, "polynomial")
    assert np.abs(np.array(res.model.k) - true.k).max() <= 1e-4
    assert abs(res.objective - unc.objective) <= 1e-8
    assert res.shape_report.max_violation <= 1e-6


def test_barrel_on_pincushion_data():
    true = DistortionModel("polynomial", (0.1, 0.05, 0, 0, 0, 0))
    data = synth_correspondences(true, (0.02, 0.5), n=200, seed=5)
    cost = assemble_cost(data)
    res = solve_barrel(cost, CalibConfig(rbar=1.0, shape="barrel"))
    unc = solve_unconstrained(cost, "polynomial")
    assert res.objective > unc.objective + 1e-6
    assert res.shape_report.max_violation <= 1e-6


def test_barrel_single_point_degenerate():
    cost = assemble_cost([(0.3, 0.1, 0.29, 0.095)])
    res = solve_barrel(cost, CalibConfig(rbar=1.0, shape="barrel"))
    assert res.shape_report.max_violation <= 1e-6
    assert res.warnings  # degenerate-data warning attached


def test_pincushion_noiseless_recovery():
    true = DistortionModel("division", (0, 0, 0, -0.08, 0.0, 0.0))
    data = synth_correspondences(true, (0.02, 0.5), n=200, seed=6)
    cost = assemble_cost(data)
    res = solve_pincushion(cost, CalibConfig(rbar=1.0, shape="pincushion"))
    assert res.solver_status == "optimal"
    assert res.certified
    assert abs(res.model.k[3] + 0.08) <= 1e-3
    assert res.shape_report.max_violation <= 1e-6


def test_pincushion_identity_data():
    data = synth_correspondences(DistortionModel.identity(), (0.02, 0.5),
                                 n=100, seed=7)
    res = solve_pincushion(assemble_cost(data),
                           CalibConfig(rbar=1.0, shape="pincushion"))
    assert res.certified
    # Every constraint is active at the optimum, so the cost valley is flat
    # around k = 0 and the extracted coefficients carry matching slop.
    assert np.abs(res.model.k).max() <= 1e-3
    assert res.objective <= 1e-8


def test_pincushion_on_barrel_data():
    # Division model with a decreasing multiplier: the pincushion
    # constraints are fully active and the certified fit must cost more
    # than the unconstrained one.
    true = DistortionModel("division", (0, 0, 0, 0.06, 0.0, 0.0))
    data = synth_correspondences(true, (0.02, 0.5), n=200, seed=8)
    cost = assemble_cost(data)
    res = solve_pincushion(cost, CalibConfig(rbar=1.0, shape="pincushion"))
    unc = solve_unconstrained(cost, "division")
    assert res.certified
    assert res.objective > unc.objective + 1e-6
    assert res.shape_report.max_violation <= 1e-6
    assert pincushion_feasible(*res.model.k[3:], rbar=1.0, tol=1e-6)


def test_zero_crossing_recovers_generator():
    # Solid cubic coefficients keep the rational parameterization uniquely
    # determined by the data (weak ones leave a near common-factor ridge).
    true = DistortionModel("rational", (-0.2, 0.08, 0.06, -0.15, 0.07, 0.05))
    g_min = np.polyval(true.g_coeffs[::-1], np.linspace(0, 4, 2001)).min()
    assert g_min > 0.1, "generator must satisfy the constraint strictly"
    data = synth_correspondences(true, (0.05, 2.5), n=400, seed=9)
    cost = assemble_cost(data)
    res = solve_zero_crossing(cost, CalibConfig(rbar=4.0, margin_p=0.1,
                                                shape="positivity"))
    assert np.abs(np.array(res.model.k) - true.k).max() <= 1e-4
    assert res.shape_report.max_violation <= 1e-6


def test_zero_crossing_eliminates_common_root():
    # A generator carrying a common linear factor makes the rational
    # parameterization degenerate; mild pixel noise then drives the
    # least-squares fit onto a representation whose f and g share roots
    # inside the field-of-view interval, which is the zero-crossing
    # pathology.  The constrained fit must clear the interval.
    model = common_root_mustache(rho=2.0, a=-0.16, b=0.10, c=-0.28, d=0.14)
    data = synth_correspondences(model, (0.05, 1.2), n=400, seed=10,
                                 noise=0.5 / 540)
    cost = assemble_cost(data)
    unc = solve_unconstrained(cost, "rational")
    groots = np.roots(np.array(unc.model.g_coeffs)[::-1])
    greal = groots[np.abs(groots.imag) < 1e-6].real
    inside = greal[(greal > 0.3) & (greal < 3.8)]
    assert len(inside) >= 1
    froots = np.roots(np.array(unc.model.f_coeffs)[::-1])
    freal = froots[np.abs(froots.imag) < 1e-6].real
    assert min(abs(fr - gr) for fr in freal for gr in inside) <= 0.02

    cfg = CalibConfig(rbar=4.0, margin_p=0.1, shape="positivity")
    res = solve_zero_crossing(cost, cfg)
    rs = np.linspace(0, 4, 4001)
    g_vals = np.polyval(np.array(res.model.g_coeffs)[::-1], rs)
    assert g_vals.min() >= 0.1 - 1e-6


def test_zero_crossing_large_margin_approaches_polynomial_fit():
    # A genuinely cubic numerator: any nontrivial denominator then leaves a
    # degree-overflow residual, so the margin p ~ 1 forces g to one.
    true = DistortionModel("polynomial", (-0.12, 0.02, 0.03, 0, 0, 0))
    data = synth_correspondences(true, (0.05, 0.9), n=300, seed=11)
    cost = assemble_cost(data)
    res = solve_zero_crossing(cost, CalibConfig(rbar=1.0, margin_p=0.999,
                                                shape="positivity"))
    poly_fit = solve_unconstrained(cost, "polynomial")
    # p ~ 1 nearly pins the denominator, so the fitted curve collapses onto
    # the polynomial fit over the data range (coefficients may still roam a
    # near-degenerate valley of the rational parameterization).
    assert abs(res.objective - poly_fit.objective) <= 1e-6 * (
        1 + poly_fit.objective)
    rs = np.linspace(0.0, 0.9, 200)
    assert np.abs(res.model.L(rs) - poly_fit.model.L(rs)).max() <= 1e-5


def test_objective_ordering_unconstrained_below_constrained():
    rng = np.random.default_rng(13)
    for seed in range(3):
        data = synth_correspondences(TRUE_RATIONAL, (0.05, 0.8), n=150,
                                     seed=seed, noise=2.0 / 540)
        cost = assemble_cost(data)
        unc_p = solve_unconstrained(cost, "polynomial")
        barrel = solve_barrel(cost, CalibConfig(rbar=1.0, shape="barrel"))
        assert unc_p.objective <= barrel.objective + 1e-7
        unc_r = solve_unconstrained(cost, "rational")
        zc = solve_zero_crossing(cost, CalibConfig(rbar=1.0, margin_p=0.1,
                                                   shape="positivity"))
        assert unc_r.objective <= zc.objective + 1e-7


def test_radius_scaling_covariance_at_residual_level():
    # Scaling all coordinates by s and k_j by s^-j leaves residuals equal.
    rng = np.random.default_rng(14)
    data = rng.normal(size=(80, 4)) * 0.4
    k = rng.normal(size=6) * 0.2
    s = 1.7
    scaled = data * s
    k_scaled = k / s ** np.array([1, 2, 3, 1, 2, 3])
    cost = assemble_cost(data)
    cost_s = assemble_cost(scaled)
    # Residual vectors scale by s, so the quadratic cost scales by s^2.
    assert cost_s.objective(k_scaled) == pytest.approx(
        s ** 2 * cost.objective(k), rel=1e-8)


def test_csv_roundtrip(tmp_path):
    data = synth_correspondences(TRUE_RATIONAL, (0.1, 1.0), n=20, seed=15)
    path = tmp_path / "corr.csv"
    write_correspondences(path, data)
    back = read_correspondences(path)
    assert np.array_equal(back, data)


def test_csv_malformed_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y,xhat,yhat\n1.0,2.0,3.0\n")
    with pytest.raises(calib.CalibDataError, match=":2:"):
        read_correspondences(path)
    path.write_text("a,b\n")
    with pytest.raises(calib.CalibDataError, match=":1:"):
        read_correspondences(path)


def test_residual_rms_identity():
    data = synth_correspondences(DistortionModel.identity(), (0.1, 1.0),
                                 n=30, seed=16)
    assert residual_rms(data, DistortionModel.identity()) <= 1e-15


def test_pincushion_uncertified_reported_distinctly():
    # At the lowest order with noisy data the extracted candidate is not
    # repairable; capping escalation there must surface an uncertified
    # result carrying the bound instead of a fake optimum.
    true = DistortionModel("division", (0, 0, 0, -0.08, 0.0, 0.0))
    data = synth_correspondences(true, (0.02, 0.5), n=256, seed=5,
                                 noise=2.0 / 540)
    res = solve_pincushion(assemble_cost(data),
                           CalibConfig(rbar=1.0, shape="pincushion",
                                       delta_max=1))
    assert res.solver_status == "uncertified"
    assert res.certified is False
    assert res.relaxation_order == 1
    assert res.lower_bound is not None and res.lower_bound > 0
