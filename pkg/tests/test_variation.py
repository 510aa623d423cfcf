"""Sphere algebra, Poincare inequality, measure and functional second variations."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from symstab.gaussian_core import sphere_volume
from symstab.sets import Ball, BallComplement, Ellipse2D, StarShaped2D
from symstab.variation import (
    FlowSpec, GaussianProductKernel, MehlerKernel, NormalPerturbation, QuadraticDefectKernel,
    closed_form_bound, g_basis, g_gram, general_second_variation, kernel_functional,
    kernel_functional_fd, measure_along_flow, measure_fd, measure_variation, phase_classify,
    poincare_ratio, second_variation_F, second_variation_noise, sphere_moment, sphere_nodes,
)


def _radial_quartic(n):
    # int_0^inf s^{n+3} e^{-s^2/2} ds
    return 2 ** ((n + 2) / 2) * special.gamma((n + 4) / 2)


@pytest.mark.parametrize("n", range(2, 7))
@pytest.mark.parametrize("r", [0.7, 1.0, 2.4])
def test_sphere_moments_via_gaussian_identity(n, r):
    # int_{R^n} p e^{-|x|^2/2} = int_0^inf s^{n+3} e^{-s^2/2} ds * int_{S^{n-1}} p  (p quartic)
    gauss = (2 * math.pi) ** (n / 2)
    unit_x14 = 3 * gauss / _radial_quartic(n)
    unit_x12x22 = gauss / _radial_quartic(n)
    assert sphere_moment(n, r, "x1_4") == pytest.approx(r ** (n + 3) * unit_x14, rel=1e-12)
    assert sphere_moment(n, r, "x1sq_x2sq") == pytest.approx(r ** (n + 3) * unit_x12x22, rel=1e-12)


def test_sphere_moments_direct_quadrature_2d():
    r = 1.7
    ref, _ = integrate.quad(lambda t: (r * math.cos(t)) ** 4 * r, 0, 2 * math.pi, epsabs=1e-13)
    assert sphere_moment(2, r, "x1_4") == pytest.approx(ref, abs=1e-9)
    ref, _ = integrate.quad(lambda t: (r * r * math.cos(t) * math.sin(t)) ** 2 * r, 0, 2 * math.pi)
    assert sphere_moment(2, r, "x1sq_x2sq") == pytest.approx(ref, abs=1e-9)


def test_sphere_moment_errors():
    with pytest.raises(ValueError):
        sphere_moment(1, 1.0, "x1_4")
    with pytest.raises(ValueError):
        sphere_moment(3, 1.0, "x1_3")


@pytest.mark.parametrize("n", range(2, 7))
def test_gram_matrix_via_gaussian_moments(n):
    # g_i = sum_k a_k x_k^2 with a = n e_i - 1; E[x_k^2 x_l^2] = 1 + 2 delta_kl
    r = 1.3
    A = n * np.eye(n) - np.ones((n, n))
    E = A @ (np.ones((n, n)) + 2 * np.eye(n)) @ A.T
    expected = E * (2 * math.pi) ** (n / 2) / _radial_quartic(n) * r ** (n + 3)
    assert np.allclose(g_gram(n, r), expected, rtol=1e-12)
    K = r ** (n + 3) * sphere_volume(n) / (n * (n + 2))
    assert g_gram(n, r)[0, 0] == pytest.approx(2 * n * (n - 1) * K, rel=1e-12)
    assert g_gram(n, r)[0, 1] == pytest.approx(-2 * n * K, rel=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_gram_matrix_by_surface_quadrature(n):
    pts, w = sphere_nodes(n, 1.3)
    G = g_basis(pts)
    assert np.allclose((G * w[:, None]).T @ G, g_gram(n, 1.3), rtol=1e-10, atol=1e-12)
    assert np.allclose(w @ G, 0.0, atol=1e-10)


def test_sphere_nodes_unsupported_dimension():
    with pytest.raises(NotImplementedError):
        sphere_nodes(4, 1.0)


def _random_trig(rng, kmax=8):
    a = rng.standard_normal(kmax + 1) / (1 + np.arange(kmax + 1))
    b = rng.standard_normal(kmax + 1) / (1 + np.arange(kmax + 1))
    a[0] = 0.0

    def f(t):
        k = np.arange(kmax + 1)
        return np.cos(np.outer(t, k)) @ a + np.sin(np.outer(t, k)) @ b
    return f


def test_poincare_random_perturbations():
    rng = np.random.default_rng(5)
    worst = math.inf
    for trial in range(100):
        kind = trial % 3
        if kind == 0:
            f = NormalPerturbation.from_function(rng.uniform(0.5, 3), _random_trig(rng), 256)
        else:
            n = 3 if kind == 1 else 5
            f = NormalPerturbation(n, rng.uniform(0.5, 3), g_coeffs=tuple(rng.standard_normal(n)))
        p = poincare_ratio(f)
        worst = min(worst, p.slack / p.constant)
    assert worst >= -1e-12


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_poincare_equality_for_g1(n):
    p = poincare_ratio(NormalPerturbation(n, 1.4, g_coeffs=(1.0,)))
    assert p.ratio == pytest.approx(1.0, abs=1e-9)


def test_poincare_circle_instance():
    f = NormalPerturbation(2, 1.0, g_coeffs=(1.0,))
    assert f.integrals()[1] == pytest.approx(math.pi, rel=1e-12)
    assert poincare_ratio(f).lhs == pytest.approx(math.pi**2 / 2, rel=1e-10)


def test_perturbation_validation():
    with pytest.raises(ValueError):
        poincare_ratio(NormalPerturbation.from_function(1.0, lambda t: 1 + np.cos(2 * t), 64))
    with pytest.raises(ValueError):
        NormalPerturbation(2, 1.0)
    with pytest.raises(ValueError):
        NormalPerturbation(1, 1.0, g_coeffs=(1.0,))
    with pytest.raises(ValueError):
        second_variation_F(NormalPerturbation(2, 1.0, g_coeffs=(1.0,)))  # not normalized


def test_phase_classify():
    assert phase_classify(2, 2.0) == "boundary"
    assert phase_classify(5, 3.0) == "not_locally_max"
    assert phase_classify(3, 1.0) == "locally_max"


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("r", [0.5, 1.0, 2.0, 2.4, 3.0])
def test_second_variation_matches_closed_form(n, r):
    rep = second_variation_F(NormalPerturbation.g1(n, r))
    # at r^2 = n + 2 the exact value is 0 and only an absolute comparison is meaningful
    assert rep.second_variation == pytest.approx(rep.closed_form_bound, rel=1e-8, abs=1e-15)
    assert abs(rep.measure_second_residual) < 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_sign_flip_scan(n):
    for r in np.round(np.arange(0.5, 3.0001, 0.1), 10):
        v = second_variation_F(NormalPerturbation.g1(n, r)).second_variation
        d = r * r - n - 2
        if abs(d) < 1e-9:
            assert abs(v) < 1e-12
        else:
            assert np.sign(v) == np.sign(d)


@pytest.mark.parametrize("n", [4, 5, 8])
def test_closed_form_branch(n):
    r = 2.0
    rep = second_variation_F(NormalPerturbation.g1(n, r))
    assert rep.second_variation == pytest.approx(closed_form_bound(n, r), rel=1e-12)


@pytest.mark.parametrize("k", [1, 3, 4, 6])
def test_perturbation_orthogonal_to_g_is_negative(k):
    f = NormalPerturbation.from_function(2.4, lambda t: np.cos(k * t), 512).normalized()
    assert second_variation_F(f).second_variation < 0


@pytest.mark.parametrize("n", [2, 3])
def test_complement_reports_identical(n):
    r = 1.5
    a = second_variation_F(NormalPerturbation.g1(n, r))
    b = second_variation_F(NormalPerturbation.g1(n, r, complement=True))
    assert b.second_variation == pytest.approx(a.second_variation, rel=1e-12)


def test_dilation_measure_variation_closed_form():
    # gamma_2(B(0, r e^t)) = 1 - exp(-r^2 e^{2t}/2)
    r = 1.3
    mv = measure_variation(FlowSpec("dilation", 2), Ball(2, r))
    e = math.exp(-r * r / 2)
    assert mv.first == pytest.approx(r * r * e, rel=1e-12)
    assert mv.second == pytest.approx((2 * r * r - r**4) * e, rel=1e-12)


@pytest.mark.parametrize("A", [Ball(2, 1.3), Ball(3, 0.9), BallComplement(2, 1.6)], ids=str)
def test_measure_variation_vs_fd(A):
    for flow in (FlowSpec("dilation", A.dim), FlowSpec("corollary_field", A.dim, A.radius, (1.0, -0.5))):
        mv, fd = measure_variation(flow, A), measure_fd(flow, A)
        assert mv.first == pytest.approx(fd.first, abs=1e-6)
        assert mv.second == pytest.approx(fd.second, abs=1e-6)


@pytest.mark.parametrize("n,r", [(2, 1.0), (2, 2.4), (3, 1.5)])
def test_corollary_field_preserves_measure_to_third_order(n, r):
    flow = NormalPerturbation.g1(n, r).flow()
    A = Ball(n, r)
    m0 = A.measure()
    devs = [abs(measure_along_flow(flow, A, t) - m0) for t in (0.04, 0.02)]
    assert devs[0] < 1e-4
    # O(t^3): halving t divides the deviation by about 8
    assert devs[1] <= devs[0] / 6 + 1e-13


def test_polynomial_normal_field_has_requested_normal_part():
    r = 1.7
    f = NormalPerturbation.from_function(r, lambda t: np.cos(2 * t) + 0.3 * np.sin(3 * t), 256)
    flow = f.flow()
    pts, _ = sphere_nodes(2, r, 64)
    XN = np.sum(flow.field(pts) * pts, -1) / r
    assert np.allclose(XN, f.values(pts), atol=1e-12)
    mv = measure_variation(flow, Ball(2, r))
    assert abs(mv.first) < 1e-12 and abs(mv.second) < 1e-12


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=2), st.floats(-2, 2))
@settings(max_examples=25, deadline=None)
def test_divergence_matches_numerical(x, c):
    flow = FlowSpec("corollary_field", 2, 1.3, (1.0, c))
    p = np.array(x)
    h = 1e-6
    num = sum((flow.field(p + h * e)[i] - flow.field(p - h * e)[i]) / (2 * h)
              for i, e in enumerate(np.eye(2)))
    assert flow.divergence(p) == pytest.approx(num, abs=1e-6)


def test_zero_flow():
    flow = FlowSpec.zero(2)
    y, logj = flow.flow(np.ones((3, 2)), 0.5)
    assert np.array_equal(y, np.ones((3, 2))) and np.all(logj == 0)


def test_flow_validation():
    with pytest.raises(ValueError):
        FlowSpec("spiral")
    with pytest.raises(ValueError):
        FlowSpec("polynomial_normal", 3, samples=np.ones(8))


@pytest.mark.parametrize("rho", [0.1, -0.2, 0.3])
def test_noise_variation_converges_and_calibrates(rho):
    rep = second_variation_noise(NormalPerturbation.g1(2, 1.5), rho)
    assert rep.quadrature_error < 1e-8
    assert rep.calibration_constant is not None
    assert math.isfinite(rep.second_variation)


def test_noise_variation_small_rho_limit():
    f = NormalPerturbation.g1(2, 1.5)
    cal = [second_variation_noise(f, rho).calibration_constant for rho in (0.04, 0.02, 0.01)]
    # |value/rho^2 - reference| = O(|rho|^{1/2}) or better means bounded calibration constants
    assert max(cal) < 10 * max(cal[0], 1e-12) + 1e-9


def test_noise_variation_complement_identical():
    a = second_variation_noise(NormalPerturbation.g1(2, 1.5), 0.2)
    b = second_variation_noise(NormalPerturbation.g1(2, 1.5, complement=True), 0.2)
    assert b.second_variation == pytest.approx(a.second_variation, rel=1e-9)


def test_noise_variation_3d_runs():
    rep = second_variation_noise(NormalPerturbation.g1(3, 1.2), 0.2)
    assert rep.quadrature_error < 1e-8


def test_gaussian_product_kernel_functional_is_measure_squared():
    A = Ellipse2D(1.5, 0.8)
    val = kernel_functional(GaussianProductKernel(), A, FlowSpec.zero(), 0.0)
    assert val == pytest.approx(A.measure() ** 2, abs=1e-10)


def test_mehler_kernel_functional_is_stability():
    from symstab.noise import stability_series
    A = Ball(2, 1.2)
    val = kernel_functional(MehlerKernel(0.3), A, FlowSpec.zero(), 0.0)
    assert val == pytest.approx(stability_series(A, A, 0.3, 30).value, abs=1e-9)


def test_quadratic_kernel_functional_is_F():
    from symstab.noise import functional_F
    A = Ellipse2D(1.5, 0.8)
    val = kernel_functional(QuadraticDefectKernel(), A, FlowSpec.zero(), 0.0)
    assert val == pytest.approx(functional_F(A), abs=1e-10)


@pytest.mark.parametrize("kernel", [GaussianProductKernel(), MehlerKernel(0.4), QuadraticDefectKernel()],
                         ids=["product", "mehler", "quadratic"])
def test_general_second_variation_dilation_circle(kernel):
    flow = FlowSpec("dilation", 2)
    rep = general_second_variation(kernel, Ball(2, 1.1), flow)
    d1, half_d2 = kernel_functional_fd(kernel, Ball(2, 1.1), flow)
    assert rep.first_variation == pytest.approx(d1, abs=1e-5)
    assert rep.second_variation == pytest.approx(half_d2, abs=1e-5)


def test_general_second_variation_on_star_set():
    A = StarShaped2D.from_function(lambda t: 1.2 + 0.2 * np.cos(2 * t), 256)
    f = NormalPerturbation.from_function(1.2, lambda t: np.cos(2 * t), 256)
    flow = FlowSpec("polynomial_normal", 2, 1.2, samples=f.samples)
    kernel = MehlerKernel(0.3)
    rep = general_second_variation(kernel, A, flow)
    d1, half_d2 = kernel_functional_fd(kernel, A, flow)
    assert rep.first_variation == pytest.approx(d1, abs=1e-5)
    assert rep.second_variation == pytest.approx(half_d2, abs=1e-5)


def test_general_second_variation_rejects_3d():
    with pytest.raises(ValueError):
        general_second_variation(MehlerKernel(0.2), Ball(3, 1.0), FlowSpec("dilation", 3))
    with pytest.raises(ValueError):
        MehlerKernel(1.0)
