"""Fourier-side bounds and the embedding experiments on fast inputs."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gammaln

from ultralab import embedding_lab as el
from ultralab import gevrey_calculus as gc
from ultralab.core_sequences import Verdict, WeightSequence
from ultralab.errors import GridMismatch, TruncationUncertified
from ultralab.mollifier_factory import MollifierNet
from ultralab.spectral import adaptive_sup, half_line_grid, log_leibniz, log_moments, weighted_sup

W2 = WeightSequence(2.0)


# ---------------------------------------------------------------- spectral helpers

def test_log_moments_gaussian_closed_form():
    g = half_line_grid()
    a = np.arange(0, 40, 3)
    got = log_moments(-g.xi**2, a, g)
    ref = gammaln((a + 1) / 2) - math.log(2 * math.pi)
    assert np.allclose(got, ref, atol=1e-11)


def test_log_moments_detects_slow_tail():
    g = half_line_grid()
    with pytest.raises(TruncationUncertified):
        log_moments(-2 * np.log1p(g.xi), np.array([0]), g)


def test_weighted_sup_and_cap_doubling():
    v, k = weighted_sup(np.zeros(10), 4.0, 2.0)
    assert k in (1, 2) and v == pytest.approx(math.log(4))
    # terms a*log(50): the sup of 50**a / a! sits near a = 50, past the first cap
    val, k, cap, hit = adaptive_sup(lambda a: a * math.log(50.0), 1.0, 1.0, cap=8)
    assert k in (49, 50) and cap == 64 and not hit


@given(st.lists(st.floats(-20, 20), min_size=6, max_size=6), st.lists(st.floats(-20, 20), min_size=6, max_size=6))
def test_log_leibniz_matches_direct(a, b):
    a, b = np.array(a), np.array(b)
    out = log_leibniz(a, b)
    for k in range(6):
        ref = sum(math.comb(k, j) * math.exp(a[j] + b[k - j]) for j in range(k + 1))
        assert out[k] == pytest.approx(math.log(ref), rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------- multipliers

def test_flat_multiplier_is_one_near_origin():
    M = el.FlatMultiplier("pow", 2.0)
    assert M.g(16) == 9
    assert abs(M(16, [0.0])[0] - 1) == 0
    assert M.log_abs_one_minus(16, [1e-3])[0] < -100


def test_shifted_multiplier_phase():
    base = el.FlatMultiplier("der", 2.0)
    S = el.ShiftedMultiplier(MollifierNet("der", 2.0), 0.5)
    assert S.base == base
    xi = np.array([0.3, 2.0])
    assert np.allclose(S(8, xi), base(8, xi) * np.exp(-0.5j * xi / 8))


def test_as_multiplier_rejects():
    with pytest.raises(TypeError):
        el.as_multiplier(3.0)


def test_ultradistribution_validation():
    with pytest.raises(ValueError):
        el.UltraDistribution("delta_derivative", -1)
    with pytest.raises(ValueError):
        el.UltraDistribution("derivative_of_continuous", 0, gc.sine(1.0))
    d = el.UltraDistribution.delta(2)
    assert np.allclose(d.log_fourier([1.0, math.e]), [0.0, 2.0])


# ---------------------------------------------------------------- experiments on a Gaussian

@pytest.fixture(scope="module")
def gauss():
    return gc.gaussian(2.0)


def test_null_decay_gaussian_pow(gauss):
    res = el.null_decay_experiment(gauss, el.FlatMultiplier("pow", 2.0), gc.GevreyParams(2.0, 1.0, 2.0),
                                   W2, nus=(1.0,), control=True)
    fit = res.fits[1.0]
    assert fit.verdict is Verdict.NULL
    assert np.all(np.diff(fit.log_p) < 0)
    assert res.control.verdict is not Verdict.NULL
    assert res.passed


def test_null_decay_zero_is_null():
    z = gc.constant(0.0, 2.0)
    z = gc.SampledFunction(z.grid, z.log_abs, z.sign, "closed_form", "zero", fourier=lambda xi: 0 * xi,
                           tail=z.tail)
    res = el.null_decay_experiment(z, el.FlatMultiplier("pow", 2.0), gc.GevreyParams(2.0, 1.0, 2.0), W2,
                                   nus=(1.0,))
    assert res.fits[1.0].verdict is Verdict.NULL and res.control is None


def test_moderate_growth_delta_der():
    res = el.moderate_growth_experiment(el.UltraDistribution.delta(), el.FlatMultiplier("der", 2.0),
                                        gc.GevreyParams(2.0, 1.0, 2.0), WeightSequence(1.0))
    assert res.passed and res.exact_even
    assert np.all(np.diff(res.raw_log_sup) > 0)  # |phi_n(0)| grows like n


def test_weak_equality_identical_nets_and_shift(gauss):
    P = el.FlatMultiplier("pow", 2.0)
    same = el.weak_equality_experiment(el.UltraDistribution.delta(), P, P, gauss, 2.0)
    assert same.passed and np.all(same.c == 0)
    other = el.weak_equality_experiment(el.UltraDistribution.delta(), P, el.FlatMultiplier("pow", 2.0, 1),
                                        gauss, 2.0)
    assert other.passed
    shifted = el.weak_equality_experiment(el.UltraDistribution.delta(), P, el.ShiftedMultiplier(P, 0.5),
                                          gauss, 2.0, use_bound=False)
    assert not shifted.passed


def test_product_gaussians(gauss):
    g2 = gc.gaussian(2.0, a=0.5)
    res = el.product_consistency_check(gauss, g2, el.FlatMultiplier("pow", 2.0), gc.GevreyParams(2.0, 1.0, 2.0))
    assert res.passed


def test_fit_csv(tmp_path):
    n = [8, 16, 32, 64, 128, 256]
    fit = el.make_fit(n, -np.sqrt(np.array(n, float)) * 2, W2, label="x")
    p = tmp_path / "fit.csv"
    fit.to_csv(p, W2)
    rows = p.read_text().splitlines()
    assert rows[0] == "n,n_pow,log_p,log_p_over_n_pow"
    assert float(rows[1].split(",")[3]) == pytest.approx(-2.0)
    assert fit.slopes[-1] == pytest.approx(-2.0)


def test_regularize_matches_convolution_and_rejects_tables():
    net = MollifierNet("pow", 2.0)
    f = gc.sine(1.0, S_max=2, npts=9)
    (r,) = el.regularize(f, net, [4], S=1)
    # sin * phi_n = Re(FT(phi_n)(1)) sin, and FT(phi_n)(1) = w_g(1/n) is 1 to many digits
    scale = math.exp(float(net.log_window(4, [1.0])[0]))
    assert np.allclose(r.table[0], scale * np.sin(r.x), atol=1e-9 + r.certificate[0])
    assert np.allclose(r.table[1], scale * np.cos(r.x), atol=1e-9 + r.certificate[1])
    tab = gc.SampledFunction(f.grid, f.log_abs, f.sign, "tabulated", "t")
    with pytest.raises(GridMismatch):
        el.regularize(tab, net, [4])
