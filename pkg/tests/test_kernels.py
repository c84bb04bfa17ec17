"""Flat windows, the Gevrey bump, truncated Taylor arithmetic and panel quadrature."""
import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from ultralab import bump, flat, taylor
from ultralab.errors import QuadratureDivergence
from ultralab.quadrature import certified, panels


# ---------------------------------------------------------------- flat windows

@pytest.mark.parametrize("n, x", [(1, 1.0), (2, 2.0), (3, 0.7), (5, 4.5), (8, 12.0), (2, 0.0)])
def test_h_matches_oracle(n, x):
    assert flat.eval_h(n, x) == pytest.approx(float(oracles.h_flat(n, x)), rel=1e-12)


def test_h_worked_values():
    assert flat.eval_h(1, 1.0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert flat.eval_h(2, 2.0) == pytest.approx(0.190738, abs=5e-7)


@pytest.mark.parametrize("n, x", [(1, 0.5), (2, 1.2), (4, 1.05), (6, 0.9)])
def test_k_matches_oracle(n, x):
    assert flat.eval_k(n, x) == pytest.approx(float(oracles.k_flat(n, x)), rel=1e-13)
    if (n, x) == (2, 1.2):
        assert flat.eval_k(n, x) == pytest.approx(0.125732, abs=5e-7)


@given(st.integers(1, 30), st.floats(0, 200))
def test_flat_exponent_real_is_nonpositive_and_decreasing(n, x):
    a = float(flat.flat_exponent(x, n))
    b = float(flat.flat_exponent(x + 1.0, n))
    assert a <= 0.0
    assert b <= a


@pytest.mark.parametrize("n", [1, 2, 5])
def test_flat_exponent_complex_matches_oracle(n):
    z = 0.8 + 0.3j
    ref = n * n * (1 - (1 + (mp.mpc(z) / n) ** (2 * n)) ** (mp.mpf(1) / n))
    got = complex(flat.flat_exponent(np.array([z]), n)[0])
    assert got.real == pytest.approx(float(ref.real), rel=1e-12, abs=1e-14)
    assert abs(np.exp(1j * got.imag) - complex(mp.e ** (1j * ref.imag))) < 1e-12


@given(st.integers(1, 20), st.floats(0.01, 50))
def test_one_minus_window_consistent(g, xi):
    for kind in ("pow", "der"):
        lw = float(flat.log_window(kind, xi, g))
        l1 = float(flat.log_one_minus_window(kind, xi, g))
        assert math.exp(l1) == pytest.approx(-math.expm1(lw), rel=1e-10, abs=1e-300)


# ---------------------------------------------------------------- bump

@pytest.mark.parametrize("order", [1.5, 1.25, 2.0])
@pytest.mark.parametrize("x", [0.0, 0.3, -0.55, 0.8])
def test_bump_derivatives_match_oracle(order, x):
    p = bump.exponent_p(order)
    d = bump.derivatives(np.array([x]), p, 6)[:, 0]
    for a in range(7):
        ref = float(oracles.bump_derivative(x, p, a))
        assert d[a] == pytest.approx(ref, rel=1e-9, abs=1e-12 * max(1.0, abs(ref)))


def test_bump_vanishes_outside_support():
    p = bump.exponent_p(1.5)
    assert bump.bump(np.array([-1.0, 1.0, 1.5]), p).tolist() == [0.0, 0.0, 0.0]
    assert bump.bump(np.array([0.0]), p)[0] == pytest.approx(math.exp(-1))


@pytest.mark.parametrize("xi", [0.0, 0.7, 3.0, 12.0, 40.0, 150.0])
def test_bump_fourier_matches_oracle(xi):
    p = bump.exponent_p(1.5)
    v, lM = bump.fourier(np.array([xi]), p)
    ref = float(oracles.bump_fourier(xi, p))
    assert v[0].real == pytest.approx(ref, rel=1e-8, abs=1e-15)
    assert abs(v[0]) <= math.exp(lM[0]) * (1 + 1e-12)


def test_bump_fourier_center_phase():
    p = bump.exponent_p(1.5)
    xi = np.array([2.0, 5.0])
    v0, _ = bump.fourier(xi, p)
    vc, _ = bump.fourier(xi, p, center=0.25)
    assert np.allclose(vc, v0 * np.exp(-0.25j * xi), rtol=1e-13)


def test_log_majorant_dominates_on_wide_range():
    p = bump.exponent_p(1.5)
    xi = np.geomspace(1.0, 3e4, 60)
    v, lM = bump.fourier(xi, p)
    with np.errstate(divide="ignore"):
        assert np.all(np.log(np.abs(v)) <= lM + 1e-9)
    assert np.all(np.diff(lM[10:]) < 0)


# ---------------------------------------------------------------- taylor

def test_taylor_exp_of_x_is_exp_series():
    K = 8
    e = taylor.exp([Fraction(0), Fraction(1)] + [Fraction(0)] * (K - 1), K, Fraction(1))
    assert e == [Fraction(1, math.factorial(k)) for k in range(K + 1)]


@given(st.fractions(min_value=-3, max_value=3, max_denominator=7))
def test_binomial_series_coefficients(a):
    b = taylor.binomial_series(a, 6)
    for k, c in enumerate(b):
        ref = Fraction(1)
        for j in range(k):
            ref *= (a - j) / (j + 1)
        assert c == ref


@given(st.lists(st.integers(-5, 5), min_size=4, max_size=4), st.lists(st.integers(-5, 5), min_size=4, max_size=4))
def test_taylor_mul_commutes_and_matches_convolution(a, b):
    K = 3
    ab = taylor.mul(a, b, K)
    assert ab == taylor.mul(b, a, K)
    assert list(ab) == list(np.convolve(a, b)[: K + 1])


def test_power_inverts_square():
    K = 6
    v = [Fraction(1), Fraction(2), Fraction(-1)] + [Fraction(0)] * (K - 2)
    sq = taylor.mul(v, v, K)
    root = taylor.power(sq, Fraction(1, 2), K, Fraction(1))
    assert root[: K + 1] == v[: K + 1]


# ---------------------------------------------------------------- quadrature

def test_panels_integrate_polynomials_exactly():
    x, w = panels(np.linspace(0, 2, 5), 8)
    assert np.sum(w * x**15) == pytest.approx(2**16 / 16, rel=1e-13)


def test_certified_reports_error_and_raises():
    res = certified(np.cos, np.linspace(0, math.pi / 2, 5), 16, 1e-12)
    assert res.value == pytest.approx(1.0, rel=1e-14)
    assert res.error < 1e-12
    with pytest.raises(QuadratureDivergence):
        certified(lambda x: np.sin(400 * x), np.linspace(0, 1, 2), 4, 1e-12)
