import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from ballsquare.errors import PreconditionError
from ballsquare.kernels import (
    KernelFamily, RadialSymbol, bessel_j1, build_window_pair, chi_hat_decay_check,
    chi_hat_limit_coeff, chi_hat_minus_one, envelope_sup, eval_A, eval_chi_hat, eval_gamma_n,
    eval_K2_hat, eval_K_hat,
)


def chi_closed_form(n, r):
    """Independent closed forms: sinc, 2 J1(r)/r and 3 j1(r)/r (spherical Bessel)."""
    r = np.asarray(r, dtype=float)
    if n == 1:
        return np.sinc(r / np.pi)
    safe = np.where(r == 0, 1.0, r)
    if n == 2:
        out = 2 * special.j1(safe) / safe
    else:
        out = 3 * special.spherical_jn(1, safe) / safe
    return np.where(r == 0, 1.0, out)


def chi_mp(n, r):
    """chi_hat at 40 digits: Gamma(n/2+1) (2/r)^(n/2) J_{n/2}(r)."""
    with mpmath.workdps(40):
        r = mpmath.mpf(r)
        nu = mpmath.mpf(n) / 2
        return mpmath.gamma(nu + 1) * (2 / r) ** nu * mpmath.besselj(nu, r)


R = np.concatenate([[0.0], np.geomspace(1e-6, 1.0, 50), np.linspace(0.0, 50.0, 2001)[1:]])


@pytest.mark.parametrize("n", [1, 2, 3])
def test_chi_hat_matches_closed_forms(n):
    assert np.max(np.abs(eval_chi_hat(n, R) - chi_closed_form(n, R))) < 1e-12


def test_chi_hat_examples():
    assert eval_chi_hat(1, 0.0) == 1.0
    assert abs(eval_chi_hat(1, math.pi)) < 1e-15
    assert eval_chi_hat(3, 2.0) == pytest.approx(3 * (math.sin(2) - 2 * math.cos(2)) / 8,
                                                 rel=1e-13)


def test_chi_hat_2d_against_disk_quadrature():
    # average of cos(r x_1) over the unit disk, integrated directly
    for r in (0.5, 3.0, 11.0, 37.0):
        val, _ = integrate.dblquad(lambda y, x: math.cos(r * x), -1, 1,
                                   lambda x: -math.sqrt(1 - x * x),
                                   lambda x: math.sqrt(1 - x * x), epsabs=1e-13, epsrel=1e-12)
        assert eval_chi_hat(2, r) == pytest.approx(val / math.pi, abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_chi_hat_minus_one_small_r_high_precision(n):
    for r in (1e-8, 1e-5, 1e-3, 0.3, 0.99, 1.01, 5.0):
        exact = float(chi_mp(n, r) - 1)
        assert chi_hat_minus_one(n, r) == pytest.approx(exact, rel=1e-12)


@given(st.sampled_from([1, 2, 3]), st.floats(0.0, 1e4))
@settings(max_examples=200, deadline=None)
def test_chi_hat_bounded_by_one(n, r):
    assert abs(eval_chi_hat(n, r)) <= 1.0 + 1e-15


@given(st.sampled_from([1, 2, 3]), st.floats(0.0, 1e3))
@settings(max_examples=100, deadline=None)
def test_chi_hat_even(n, r):
    assert eval_chi_hat(n, -r) == eval_chi_hat(n, r)


def test_bessel_j1_matches_scipy():
    r = np.concatenate([np.linspace(0, 30, 3001), np.geomspace(30, 1e5, 2000)])
    assert np.max(np.abs(bessel_j1(r) - special.j1(r))) < 1e-11


@pytest.mark.parametrize("n", [1, 2, 3])
def test_limit_coeff(n):
    assert chi_hat_limit_coeff(n) == pytest.approx(-1 / (2 * n + 4), abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_decay_check_is_stable(n):
    a, b = chi_hat_decay_check(n, 1e3), chi_hat_decay_check(n, 1e4)
    assert 0 < a <= b <= 1.05 * a
    with pytest.raises(ValueError):
        chi_hat_decay_check(n, 5)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 1.5, 1.99])
def test_K_hat_small_r_asymptotics(n, alpha):
    fam = KernelFamily.fractional(n, alpha)
    for r in (1e-10, 1e-6, 1e-3):
        ratio = eval_K_hat(fam, r) / (-(r ** (2 - alpha)) / (2 * n + 4))
        assert ratio == pytest.approx(1.0, abs=1e-5)
    assert eval_K_hat(fam, 0.0) == 0.0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_K_hat_against_mpmath(n):
    fam = KernelFamily.fractional(n, 0.7)
    for r in (1e-6, 0.01, 0.5, 2.0, 40.0):
        exact = float((chi_mp(n, r) - 1) / mpmath.mpf(r) ** mpmath.mpf(0.7))
        assert eval_K_hat(fam, r) == pytest.approx(exact, rel=1e-11)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_K2_hat_against_mpmath(n):
    # heavy cancellation near 0: (chi - 1)/r^2 + chi/(2n+4) = O(r^2)
    for r in (1e-4, 0.05, 0.5, 0.999, 1.001, 3.0, 100.0):
        with mpmath.workdps(40):
            c = chi_mp(n, r)
            exact = float((c - 1) / mpmath.mpf(r) ** 2 + c / (2 * n + 4))
        assert eval_K2_hat(n, r) == pytest.approx(exact, rel=1e-9, abs=1e-18)


def test_K2_hat_vanishes_quadratically():
    r = np.geomspace(1e-7, 1e-4, 20)
    for n in (1, 2, 3):
        ratio = eval_K2_hat(n, r) / r ** 2
        assert np.all(np.isfinite(ratio))
        assert np.ptp(ratio) < 1e-6 * np.max(np.abs(ratio))
    # n = 1: chi_hat = 1 - r^2/6 + r^4/120 - ..., so the r^2 coefficient is 1/120 - 1/36
    assert eval_K2_hat(1, 1e-4) / 1e-8 == pytest.approx(-7 / 360, rel=1e-7)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fractional_envelope_finite_and_stable(n):
    for a in (0.25, 0.5, 1.0, 1.5):
        fam = KernelFamily.fractional(n, a)
        s1, s2 = envelope_sup(fam, points=4001), envelope_sup(fam, points=8001)
        assert math.isfinite(s2) and s2 > 0
        assert abs(s2 / s1 - 1) < 0.05


def test_second_order_envelope_needs_n3():
    fam = KernelFamily.second_order(3)
    s1, s2 = envelope_sup(fam, points=4001), envelope_sup(fam, points=8001)
    assert math.isfinite(s2) and abs(s2 / s1 - 1) < 0.05
    with pytest.raises(PreconditionError):
        envelope_sup(KernelFamily.second_order(1))


def test_family_validation():
    with pytest.raises(ValueError):
        KernelFamily.fractional(1, 2.0)
    with pytest.raises(ValueError):
        KernelFamily.fractional(4, 0.5)
    with pytest.raises(ValueError):
        eval_K_hat(KernelFamily.second_order(2), 1.0)
    assert KernelFamily.second_order(2).order == 2.0


def test_riesz_symbol_zero_mode():
    m = KernelFamily.fractional(1, 0.5).riesz_symbol()
    assert np.array_equal(m(np.array([0.0, 4.0])), [0.0, 0.5])


def test_gamma_n():
    assert eval_gamma_n(1) == pytest.approx(1.0)
    assert eval_gamma_n(2) == pytest.approx(4 / math.pi)
    assert eval_gamma_n(3) == pytest.approx(1.5)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_A_is_chi_hat_minus_one(n):
    s = np.linspace(0.0, 100.0, 101)
    assert np.max(np.abs(eval_A(n, s) - chi_hat_minus_one(n, s))) < 1e-10
    assert eval_A(1, math.pi) == pytest.approx(-1.0, abs=1e-12)


def test_radial_symbol_dilate_and_product():
    s = RadialSymbol(lambda r: r ** 2, "sq", r_max=10.0)
    d = s.dilate(2.0)
    assert d(3.0) == pytest.approx(36.0)
    assert d.r_max == 5.0
    p = s * RadialSymbol(lambda r: r + 1, "lin")
    assert p(2.0) == pytest.approx(12.0)
    assert p.r_max == 10.0
    assert (3 * s)(2.0) == pytest.approx(12.0)


W = build_window_pair()
RR = np.geomspace(1e-3, 1e3, 10_000)


def test_window_partition_of_unity():
    total = sum(W.phi_hat(2.0 ** (-j) * RR) for j in range(-20, 21))
    assert np.max(np.abs(total - 1)) < 1e-12
    assert sum(W.phi_hat(2.0 ** (-j) * 1.3) for j in range(-10, 11)) == pytest.approx(1.0)


def test_window_supports_and_bounds():
    phi, psi = W.phi_hat(RR), W.psi_hat(RR)
    assert np.all((phi >= 0) & (phi <= 1))
    assert np.all((psi >= 0) & (psi <= 1))
    assert np.all(phi[(RR < 0.5) | (RR > 2)] == 0)
    assert np.all(psi[(RR < 0.25) | (RR > 4)] == 0)
    assert np.all(psi[(RR >= 0.5) & (RR <= 2)] == 1)
    assert np.all(psi >= phi)
    assert W.psi_hat(1.0) == 1.0
    assert W.psi_hat(5.0) == 0.0


@given(st.floats(0.05, 20.0), st.floats(1.0, 2.0))
@settings(max_examples=50, deadline=None)
def test_window_theta_monotone(c, r):
    w = build_window_pair(c)
    assert w.theta(r) >= w.theta(min(r + 0.01, 2.0)) - 1e-15
    assert w.theta(np.array([r]))[0] == w.theta(r)


def test_window_theta_is_smooth_at_the_edges():
    # every derivative vanishes at r = 1, 2, so Theta is flat there
    for r0, v in ((1.0, 1.0), (2.0, 0.0)):
        for d in (1e-2, 1e-3):
            assert abs(W.theta(r0 + d) - v) < 1e-20 or abs(W.theta(r0 - d) - v) < 1e-20


def test_window_rejects_bad_steepness():
    with pytest.raises(ValueError):
        build_window_pair(0.0)


def test_band_symbol():
    s = W.band_symbol(3)
    assert s(8.0) == pytest.approx(W.phi_hat(1.0))
    assert W.bump_symbol(-1)(0.5) == 1.0
