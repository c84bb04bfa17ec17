"""Fourier-side bounds for derivatives of convolutions.

For ``u`` with transform ``U``: ``sup_x |u^(a)(x)| <= (1/2 pi) int |xi|**a |U(xi)| dxi``.
Every bound here is assembled in the log domain on a fixed graded grid on
``(0, XI_MAX]``; integrands are even in ``xi`` so the half line suffices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import CapHit, TruncationUncertified
from .quadrature import panels

XI_MAX = 3.0e6


@dataclass(frozen=True)
class HalfLineGrid:
    xi: np.ndarray
    log_w: np.ndarray
    log_xi: np.ndarray


@lru_cache(maxsize=4)
def half_line_grid(xi_max: float = XI_MAX, n_geom: int = 1500, order: int = 24) -> HalfLineGrid:
    edges = np.concatenate([[0.0], np.linspace(0.0, 10.0, 41)[1:], np.geomspace(10.0, xi_max, n_geom)[1:]])
    x, w = panels(edges, order)
    for a in (x, w):
        a.setflags(write=False)
    return HalfLineGrid(x, np.log(w), np.log(x))


def log_moments(log_f: np.ndarray, alphas: np.ndarray, grid: HalfLineGrid,
                check_tail: bool = True) -> np.ndarray:
    """``log (1/pi) int_0^inf xi**a f(xi) dxi`` for each ``a`` (``f`` given as a log).

    Raises
    ------
    TruncationUncertified
        If the integrand at the end of the grid is not negligible.
    """
    base = log_f + grid.log_w
    out = np.empty(len(alphas))
    for i, a in enumerate(alphas):
        v = a * grid.log_xi + base
        out[i] = logsumexp(v)
        if check_tail and np.isfinite(out[i]):
            tail = v[-200:].max()
            if tail > out[i] - 40.0:
                raise TruncationUncertified(f"order {a}: integrand not negligible at xi={grid.xi[-1]:.3g}")
    return out - math.log(math.pi)


def weighted_sup(log_terms: np.ndarray, nu: float, m: float):
    """``max_a a log nu - m log a! + log_terms[a]`` and the argmax."""
    a = np.arange(log_terms.size)
    v = a * math.log(nu) - m * gammaln(a + 1) + log_terms
    k = int(np.argmax(v))
    return float(v[k]), k


def adaptive_sup(term_fn, nu: float, m: float, cap: int = 64, cap_max: int = 4096):
    """Sup over ``a`` of the weighted terms, doubling the cap while the max sits on it.

    ``term_fn(alphas)`` returns the log terms. Returns ``(value, argmax, cap, cap_hit)``.
    """
    import warnings

    while True:
        alphas = np.arange(cap + 1)
        terms = term_fn(alphas)
        if np.all(np.isneginf(terms)):
            return -math.inf, 0, cap, False
        val, k = weighted_sup(terms, nu, m)
        if k < cap:
            return val, k, cap, False
        if cap >= cap_max:
            warnings.warn(CapHit(f"sup over orders still at the cap {cap}"), stacklevel=2)
            return val, k, cap, True
        cap *= 2


def log_leibniz(logA: np.ndarray, logB: np.ndarray) -> np.ndarray:
    """``log sum_j C(a, j) A_j B_{a-j}`` for ``a = 0..len-1``."""
    n = min(logA.size, logB.size)
    a = np.arange(n)
    out = np.full(n, -np.inf)
    lf = gammaln(a + 1)
    for k in range(n):
        j = a[: k + 1]
        terms = lf[k] - lf[j] - lf[k - j] + logA[j] + logB[k - j]
        out[k] = logsumexp(terms) if np.any(np.isfinite(terms)) else -np.inf
    return out
