"""Flat windows as mollifier transforms: exact flatness, uniform bounds, sampled moments, cache."""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from ultralab import mollifier_factory as mf
from ultralab.cache import Cache, cache_gc
from ultralab.errors import SeriesOverflow


@given(st.integers(1, 10**5), st.sampled_from([2.0, 3.0, 1.5]))
def test_index_maps(n, m):
    g = mf.index_map_g(n, m)
    r = int(math.floor(n ** (1 / (m - 1)) + 1e-9))
    assert g == r // 2 + 1
    mo = mf.moment_order(n, m)
    assert (mo - 1) ** m <= n * (1 + 1e-12) < mo**m * (1 + 1e-12)


def test_singularity_clearance_tends_to_half_pi():
    c = mf.singularity_clearance([1, 2, 1000])
    assert c[0] == pytest.approx(1.0)
    assert c[2] == pytest.approx(math.pi / 2, rel=1e-6)
    assert np.all(np.diff(c) > 0)


@pytest.mark.parametrize("kind", ["pow", "der"])
@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_flatness_exact(kind, n):
    rep = mf.certify_flatness(kind, n)
    assert rep.passed
    assert rep.first_nonzero == 2 * n
    assert rep.derivatives[0] == 1


def test_flatness_leading_coefficient():
    # h_n = exp(n^2 (1 - (1 + u)^{1/n})) with u = x^{2n}/n^{2n}: first term -x^{2n}/n^{2n-1}
    n = 3
    c = mf.window_taylor("pow", n, 2 * n)
    assert c[2 * n] == Fraction(-1, n ** (2 * n - 1))
    assert mf.window_taylor("der", n, 2 * n)[2 * n] == -1


def test_window_taylor_matches_mpmath():
    import mpmath as mp
    n = 2
    c = mf.window_taylor("pow", n, 12)
    ref = mp.taylor(lambda x: oracles.h_flat(n, x), 0, 12)
    for a, b in zip(c, ref):
        assert float(a) == pytest.approx(float(b), rel=1e-12, abs=1e-18)


def test_flatness_series_cap():
    with pytest.raises(SeriesOverflow):
        mf.certify_flatness("pow", 17)
    with pytest.raises(ValueError):
        mf.certify_flatness("pow", 3, order_cap=6)


def test_uniform_bounds_pow():
    rep = mf.certify_uniform_bounds("pow", range(1, 13), npts=201, n_theta=128)
    assert rep.passed
    assert max(rep.per_n.values()) < 3.0
    assert max(rep.extra["max_re_exponent"].values()) < 1.0


def test_uniform_bounds_der_finite():
    rep = mf.certify_uniform_bounds("der", range(1, 6))
    assert rep.passed and math.isfinite(rep.limit)


@pytest.fixture(scope="module")
def pow4():
    return mf.build_mollifier("pow", 2.0, 4)


def test_moment_ladder_small_n(pow4):
    rep = mf.moment_report(pow4)
    assert rep.passed
    assert rep.moments[0] == pytest.approx(1.0, abs=rep.certificates[0])
    assert pow4.imag_residue < 1e-12


@pytest.mark.parametrize("kind", ["pow", "der"])
def test_first_nonvanishing_moment_agrees_with_dual(kind):
    # n = 1 has g = 1: the second moment is the first nonzero one
    e = mf.build_mollifier(kind, 2.0, 1)
    rep = mf.moment_report(e)
    assert rep.dual_agrees
    assert not rep.within_certificate
    assert rep.moments[2] == pytest.approx(2.0, rel=1e-9)


def test_rescale_preserves_mass(pow4):
    r = mf.rescale(pow4)
    assert np.sum(r.weights * r.values) == pytest.approx(pow4.moment(0), rel=1e-14)
    assert r.radius == pytest.approx(pow4.T / 4)


def test_cache_roundtrip_and_corrupt_rebuild(tmp_path):
    cache = Cache(tmp_path)
    a = mf.build_mollifier("pow", 2.0, 2, cache=cache)
    b = mf.build_mollifier("pow", 2.0, 2, cache=cache)
    assert cache.hits == 1
    assert np.array_equal(a.values, b.values) and a.t_richardson == b.t_richardson
    (entry,) = tmp_path.glob("*.npz")
    entry.write_bytes(entry.read_bytes()[:100])
    c = mf.build_mollifier("pow", 2.0, 2, cache=cache)
    assert np.array_equal(a.values, c.values)
    assert cache_gc(tmp_path).kept == 1  # the rebuild overwrote the damaged file


def test_net_window_and_offsets():
    net = mf.MollifierNet("pow", 2.0)
    assert net.g(9) == 5
    xi = np.array([0.0, 3.0])
    assert net.log_window(9, xi)[0] == 0.0
    shifted = mf.MollifierNet("pow", 2.0, g_offset=1)
    assert shifted.g(9) == 6
    with pytest.raises(NotImplementedError):
        shifted.entry(9)
    with pytest.raises(ValueError):
        mf.MollifierNet("sinc", 2.0)
