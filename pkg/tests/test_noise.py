"""Noise operator, stability estimators, F functional and the 1D inequalities."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from symstab.hermite import ExponentialTilt
from symstab.noise import (
    Correlation, functional_F, hermite_tail_bound, level_set_check, quadratic_first_variation,
    quadratic_remainder, rearrangement_deficit, second_derivative_at_zero, stability_mc,
    stability_series, t_rho_apply, t_rho_derivative_1d, t_rho_direct,
)
from symstab.sets import (
    Ball, BallComplement, Ellipse2D, FourierTable, IntervalUnion1D, Strip, fourier_table,
    random_interval_union,
)

SETS = [Ball(1, 0.8), IntervalUnion1D([(-2.5, -1), (1, 2.5)]), Ball(2, 1.3), BallComplement(2, 1.1),
        Strip(2, 0.6), Ellipse2D(1.8, 0.9)]
IDS = [A.label() for A in SETS]


def test_correlation_validation():
    assert float(Correlation(0.3)) == 0.3
    for bad in (1.0, -1.0, 2.0):
        with pytest.raises(ValueError):
            Correlation(bad)
    with pytest.raises(ValueError):
        stability_series(Ball(1, 1.0), Ball(1, 1.0), 1.0)


@pytest.mark.parametrize("A", SETS, ids=IDS)
@pytest.mark.parametrize("rho", [0.1, -0.2])
def test_spectral_vs_direct_within_tail_bound(A, rho):
    rng = np.random.default_rng(1)
    x = rng.uniform(-1.5, 1.5, (25, A.dim))
    spec = t_rho_apply(A, rho, x, degree=16)
    direct = t_rho_direct(A, rho, x)
    assert np.all(np.abs(spec.value - direct) <= spec.tail_bound + 1e-9)


def test_direct_operator_by_quadrature():
    U = IntervalUnion1D([(-2.0, -0.5), (0.5, 2.0)])
    rho, x = 0.4, 0.7
    q = math.sqrt(1 - rho * rho)
    ref = sum(integrate.quad(lambda z: stats.norm.pdf(z), (lo - rho * x) / q, (hi - rho * x) / q)[0]
              for lo, hi in U.intervals())
    assert t_rho_direct(U, rho, np.array([[x]]))[0] == pytest.approx(ref, abs=1e-13)


def test_tail_bound_raises_when_tolerance_missed():
    with pytest.raises(Exception):
        t_rho_apply(Ball(1, 1.0), 0.3, np.array([[2.0]]), degree=2, tol=1e-12)


@pytest.mark.parametrize("lam", [0.5, 1.5])
@pytest.mark.parametrize("rho", [0.05, 0.2])
def test_tail_bound_conservative_for_tilt(lam, rho):
    L = 10
    tilt = ExponentialTilt(lam)
    table = FourierTable.from_tilt(tilt, L)
    xs = np.linspace(-2, 2, 9)[:, None]
    approx = t_rho_apply(table, rho, xs, degree=L)
    exact = ExponentialTilt(rho * lam)(xs[:, 0])  # T_rho of a tilt is a tilt
    err = np.abs(approx.value - exact)
    assert np.all(err <= approx.tail_bound)
    # the bound at L is not beaten by truncating five degrees later
    longer = t_rho_apply(FourierTable.from_tilt(tilt, L + 5), rho, xs, degree=L + 5)
    assert np.all(np.abs(longer.value - exact) <= approx.tail_bound)


def test_tail_series_diverges_for_large_rho():
    assert hermite_tail_bound(0.5, np.array([[1.0]]), 5, 1, 1.0)[0] == math.inf


def test_semigroup_and_eigenrelation():
    t = fourier_table(Ball(2, 1.3), 10)
    a = t.apply_noise(0.5).apply_noise(-0.4)
    b = t.apply_noise(-0.2)
    for e in t.indices():
        assert a[e] == pytest.approx(b[e], abs=1e-15)
        assert t.apply_noise(0.3)[e] == pytest.approx(0.3 ** sum(e) * t[e], abs=1e-16)


def test_noise_is_contraction():
    x = np.linspace(-3, 3, 31)[:, None]
    for rho in (0.0, 0.3, 0.9):
        v = t_rho_direct(IntervalUnion1D([(-1, 1)]), rho, x)
        assert np.all((v >= 0) & (v <= 1))
    # rho = 0 gives the constant gamma(A)
    v = t_rho_direct(Ball(1, 1.0), 0.0, x)
    assert np.allclose(v, Ball(1, 1.0).measure())


@pytest.mark.parametrize("A", SETS, ids=IDS)
def test_stability_series_vs_monte_carlo(A):
    s = stability_series(A, A, 0.2)
    m = stability_mc(A, A, 0.2, 200_000, seed=3)
    assert abs(s.value - m.value) < 4 * m.std_error + s.tail_bound


def test_stability_limits():
    A = Ball(2, 1.3)
    g = A.measure()
    assert stability_series(A, A, 0.0).value == pytest.approx(g * g, abs=1e-15)
    B = Strip(2, 0.5)
    assert stability_series(A, B, 0.0).value == pytest.approx(g * B.measure(), abs=1e-15)


def test_stability_mc_is_deterministic(monkeypatch):
    A, B = Ball(2, 1.0), Strip(2, 0.4)
    a = stability_mc(A, B, -0.2, 100_000, seed=9, batch_size=8192)
    monkeypatch.setenv("SYMSTAB_THREADS", "1")
    b = stability_mc(A, B, -0.2, 100_000, seed=9, batch_size=8192)
    assert a.value == b.value
    c = stability_mc(A, B, -0.2, 100_000, seed=10, batch_size=8192)
    assert abs(a.value - c.value) < 5 * math.hypot(a.std_error, c.std_error)


@pytest.mark.parametrize("A", SETS, ids=IDS)
def test_stability_monotone_in_rho(A):
    vals = [stability_series(A, A, r).value for r in (0.0, 0.1, 0.2, 0.3)]
    assert all(b >= a - 1e-14 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("A", SETS, ids=IDS)
def test_F_complement_invariance(A):
    assert functional_F(A.complement()) == pytest.approx(functional_F(A), abs=1e-14)


@pytest.mark.parametrize("A", SETS, ids=IDS)
def test_second_derivative_dominates_F(A):
    assert second_derivative_at_zero(A) >= functional_F(A) - 1e-15


def test_F_ball_closed_form():
    # F(B(0,r)) in 2D is 2 (r^2/2 e^{-r^2/2})^2
    r = 2.4
    assert functional_F(Ball(2, r)) == pytest.approx(2 * (r * r / 2 * math.exp(-r * r / 2)) ** 2, rel=1e-12)


@pytest.mark.parametrize("A", SETS, ids=IDS)
@pytest.mark.parametrize("rho", [0.05, 0.1, 0.2])
def test_taylor_remainder(A, rho):
    q = quadratic_remainder(A, rho)
    assert q.remainder <= q.bound


def test_t_rho_derivative_by_differences():
    B = IntervalUnion1D([(-2, -0.5), (0.5, 2)])
    x = np.linspace(-2, 2, 11)
    h = 1e-5
    fd = (t_rho_direct(B, 0.3, (x + h)[:, None]) - t_rho_direct(B, 0.3, (x - h)[:, None])) / (2 * h)
    assert np.allclose(t_rho_derivative_1d(B, 0.3, x), fd, atol=1e-8)


def test_level_set_ball_complement_pair():
    r = stats.norm.isf(0.35)
    A = IntervalUnion1D([(-r, r)])
    B = A.complement()
    for rho in (0.1, -0.1):
        rep = level_set_check(A, B, rho)
        assert rep.is_sublevel_set
    # a set that is not of level-set form is flagged
    bad = IntervalUnion1D([(-3, -2), (-0.2, 0.2), (2, 3)])
    rep = level_set_check(bad, bad, 0.2)
    assert not rep.is_sublevel_set
    assert rep.max_violation > 0.01


def test_level_set_degenerate_rho_zero():
    A = IntervalUnion1D([(-1, 1)])
    assert level_set_check(A, A, 0.0).degenerate


@pytest.mark.parametrize("a", [0.2, 0.5, 0.8])
def test_rearrangement_examples(a):
    rng = np.random.default_rng(11)
    for _ in range(30):
        rep = rearrangement_deficit(random_interval_union(a, rng), a=a)
        assert rep.holds


def test_rearrangement_equality_case():
    r = stats.norm.isf(0.3)
    rep = rearrangement_deficit(IntervalUnion1D([(-r, r)]))
    assert rep.l1_distance == pytest.approx(0.0, abs=1e-14)
    assert rep.holds
    with pytest.raises(ValueError):
        rearrangement_deficit(IntervalUnion1D([(-r, r)]), a=0.1)


def test_rearrangement_known_value():
    # B' = {|x| >= t} with measure 1/2 versus B = [-r, r]
    a = 0.5
    t = stats.norm.isf(0.25)
    r = stats.norm.isf(0.25)
    rep = rearrangement_deficit(IntervalUnion1D([(-np.inf, -t), (t, np.inf)]))
    db = 2 * r * stats.norm.pdf(r)
    assert rep.lhs == pytest.approx(-t * stats.norm.pdf(t) * 2 - db, abs=1e-14)
    assert rep.l1_distance == pytest.approx(1.0, abs=1e-14)
    assert rep.rhs == pytest.approx(-a / 6, abs=1e-14)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_quadratic_first_variation_is_even(x):
    A = Ellipse2D(1.5, 0.8)
    p = np.array(x)
    assert quadratic_first_variation(A, p) == pytest.approx(quadratic_first_variation(A, -p), abs=1e-13)
