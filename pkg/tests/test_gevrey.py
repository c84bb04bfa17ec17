"""Gevrey seminorms, the sigma families and the function catalog."""
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gammaln

from ultralab import gevrey_calculus as gc
from ultralab.errors import CapHit, OracleGap, TailUnbounded


def test_params_validate():
    with pytest.raises(ValueError):
        gc.GevreyParams(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        gc.GevreyParams(2.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        gc.GevreyParams(2.0, 1.0, 1.0, S_max=0)


def test_sine_seminorm_near_nu():
    # sup_a 4**a / (a!)**2 is 4 at a = 1, 2, attained where |sin^(a)| = 1
    f = gc.sine(2.0, S_max=30, npts=4097)
    v = gc.gevrey_seminorm(f, gc.GevreyParams(2.0, 4.0, 2.0))
    assert v.value == pytest.approx(4.0, rel=1e-5)
    assert v.alpha in (1, 2)
    assert not v.cap_hit


def test_exp_seminorm_is_e():
    f = gc.exponential(1.0)
    v = gc.gevrey_seminorm(f, gc.GevreyParams(2.0, 1.0, 1.0))
    assert v.value == pytest.approx(math.e, rel=1e-12)
    assert v.x == pytest.approx(1.0)


def test_roumieu_is_reciprocal_nu():
    f = gc.exponential(1.0)
    p = gc.GevreyParams(2.0, 0.5, 1.0)
    assert gc.roumieu_seminorm(f, p).log_value == gc.gevrey_seminorm(f, gc.GevreyParams(2.0, 2.0, 1.0)).log_value


def test_cap_hit_warns():
    f = gc.exponential(1.0, S_max=5)
    with pytest.warns(CapHit):
        v = gc.gevrey_seminorm(f, gc.GevreyParams(1.5, 1e6, 1.0, S_max=5))
    assert v.cap_hit and v.alpha == 5


def test_oracle_gaps():
    f = gc.sine(1.0, S_max=4)
    with pytest.raises(OracleGap):
        f.oracle(5)
    with pytest.raises(OracleGap):
        gc.gevrey_seminorm(f, gc.GevreyParams(2.0, 1.0, 1.0, S_max=10))
    with pytest.raises(OracleGap):
        gc.gevrey_seminorm(f, gc.GevreyParams(2.0, 1.0, 3.0, S_max=4))  # grid too short
    with pytest.raises(OracleGap):
        gc.SampledFunction(f.grid, f.log_abs, f.sign, "tabulated", "t")(0.0)  # no evaluator


def test_sigma_pow_requires_tail():
    with pytest.raises(TailUnbounded):
        gc.sigma_pow(gc.sine(1.0), 1.0)


def test_sigma_der_exponential_closed_form():
    # sup_a e**mu / (b**a a!) is e**mu at a = 0 when b >= 1
    f = gc.exponential(1.0, S_max=20)
    assert gc.sigma_der(f, 1.0).log_value == pytest.approx(1.0)
    # b = 1/4: sup_a 4**a / a! is 4**4/4! = 4**3/3!
    v = gc.sigma_der(f, 0.25)
    assert v.log_value == pytest.approx(1.0 + math.log(4**4 / 24))


def test_sigma_pow_gaussian_uses_tail():
    f = gc.gaussian(3.0, S_max=4)
    v = gc.sigma_pow(f, 0.1, B_max=60)
    # brute force on a wide grid
    x = np.linspace(1e-3, 30, 30000)
    beta = np.arange(61)[:, None]
    with np.errstate(divide="ignore"):
        ref = np.max(beta * np.log(x) - x * x - beta * math.log(0.1) - gammaln(beta + 1))
    assert v.log_value >= ref - 1e-6


def test_hermite_derivatives_match_finite_differences():
    f = gc.gaussian(2.0, a=1.5, S_max=6)
    x = np.array([0.3, -0.7, 1.1])
    d = f.derivatives_at(x, 6)
    h = 1e-5
    for a in range(6):
        fd = (gc._gaussian_table(x + h, 1.5, 6)[a] - gc._gaussian_table(x - h, 1.5, 6)[a]) / (2 * h)
        assert np.allclose(d[a + 1], fd, rtol=1e-6, atol=1e-8)


def test_k_flat_matches_direct_derivatives():
    f = gc.k_flat(2, 1.0, S_max=8, npts=65)
    x = f.grid
    # exp(-x**4): derivatives from a polynomial recurrence P_{a+1} = P_a' - 4x**3 P_a
    P = np.polynomial.Polynomial([1.0])
    q = np.polynomial.Polynomial([0, 0, 0, -4.0])
    for a in range(9):
        ref = P(x) * np.exp(-x**4)
        assert np.allclose(f.oracle(a), ref, rtol=1e-9, atol=1e-12)
        P = P.deriv() + q * P


def test_scaled_shifts_log():
    f = gc.gaussian(2.0)
    g = f.scaled(-3.0)
    assert np.allclose(g.log_abs, f.log_abs + math.log(3))
    assert np.array_equal(g.sign, -f.sign)
    assert g(0.0) == pytest.approx(-3.0)
    p = gc.GevreyParams(2.0, 1.0, 2.0)
    assert gc.gevrey_seminorm(g, p).log_value == pytest.approx(gc.gevrey_seminorm(f, p).log_value + math.log(3))


@given(st.floats(0.1, 10), st.floats(0.1, 10))
def test_seminorm_monotone_in_nu(nu1, nu2):
    f = gc.sine(1.0, S_max=20, npts=257)
    lo, hi = sorted((nu1, nu2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CapHit)
        a = gc.gevrey_seminorm(f, gc.GevreyParams(2.0, lo, 1.0, 20)).log_value
        b = gc.gevrey_seminorm(f, gc.GevreyParams(2.0, hi, 1.0, 20)).log_value
    assert a <= b + 1e-12


def test_zero_function_seminorm():
    f = gc.constant(0.0, 1.0)
    assert f.is_zero
    assert gc.gevrey_seminorm(f, gc.GevreyParams(2.0, 1.0, 1.0)).log_value == -math.inf


def test_csv_roundtrip(tmp_path):
    f = gc.polynomial([1.0, -2.0, 0.5], 1.0, S_max=3, npts=11)
    p = tmp_path / "f.csv"
    f.to_csv(p)
    g = gc.SampledFunction.from_csv(p)
    assert g.S == 3
    for a in range(4):
        assert np.allclose(g.oracle(a), f.oracle(a), rtol=1e-15, atol=0)
    header = p.read_text().splitlines()[0]
    assert header == "x,f,d1,d2,d3"


def test_make_rejects_unknown():
    with pytest.raises(KeyError):
        gc.make("nope", mu=1.0)
    assert gc.make("bump", order=1.5, mu=2.0).name.startswith("bump")
