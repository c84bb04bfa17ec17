"""Gevrey bump ``exp(-(1 - x**2) ** (-p))`` on ``|x| < 1``: derivatives and Fourier transform.

The order-``s`` bump uses ``p = 1/(s - 1)``. Its transform
``int beta(x) exp(-i x xi) dx`` is computed on a path that leaves ``+-1`` into
the lower half plane at the angle ``pi / (2 (p + 1))``, where the bump still
vanishes at the endpoints and the exponential factor decays. The same path
yields the majorant ``M(xi) = int |beta(z) exp(-i z xi)| |dz| >= |FT(xi)|``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from . import taylor
from .quadrature import panels

SMALL_XI = 2.0


def exponent_p(order: float) -> float:
    if order <= 1:
        raise ValueError("bump order must exceed 1")
    return 1.0 / (order - 1.0)


def log_bump(z, p: float):
    """``-(1 - z**2) ** (-p)``; ``-inf`` outside ``(-1, 1)`` on the real axis."""
    z = np.asarray(z)
    if np.iscomplexobj(z):
        return -((1 - z * z) ** (-p))
    x = z.astype(float)
    out = np.full(x.shape, -np.inf)
    inside = np.abs(x) < 1
    out[inside] = -((1 - x[inside] ** 2) ** (-p))
    return out


def bump(x, p: float, center: float = 0.0):
    return np.exp(log_bump(np.asarray(x, dtype=float) - center, p))


def _expand(x0, p: float, S: int):
    """Scaled Taylor data at interior points: ``(E, log beta(x0), s)``.

    ``beta(x0 + s tau) = beta(x0) * sum_k E[k] tau**k``.
    """
    v0 = 1 - x0 * x0
    u1 = -2 * p * x0 * v0 ** (-p - 1)
    s = np.minimum((1 - np.abs(x0)) / 2, 1.0 / np.maximum(np.abs(u1), 1e-300))
    s = np.minimum(s, 1.0)
    # v(tau) / v0 = 1 + b1 tau + b2 tau^2
    b = [np.ones_like(x0), -2 * x0 * s / v0, -(s * s) / v0]
    vp = taylor.power(b, -p, S)
    c = -(v0 ** (-p))
    u = [np.zeros_like(x0)] + [c * vk for vk in vp[1:]]
    return np.array(taylor.exp(u, S)), c, s


def signed_log_derivatives(x, p: float, S: int, center: float = 0.0):
    """``(log |beta^(alpha)(x)|, sign)`` for ``alpha = 0..S``, each of shape ``(S+1, len(x))``.

    Taylor expansion in ``x = x0 + s tau`` with ``s`` small enough that the
    scaled coefficients stay O(1); the constant ``beta(x0)`` is kept apart
    in the log domain.
    """
    x = np.asarray(x, dtype=float).ravel() - center
    la = np.full((S + 1, x.size), -np.inf)
    sg = np.zeros((S + 1, x.size))
    inside = np.abs(x) < 1
    if not np.any(inside):
        return la, sg
    E, c, s = _expand(x[inside], p, S)
    k = np.arange(S + 1)[:, None]
    with np.errstate(divide="ignore"):
        la[:, inside] = np.log(np.abs(E)) + c[None, :] + gammaln(k + 1) - k * np.log(s)[None, :]
    sg[:, inside] = np.sign(E)
    return la, sg


def log_abs_derivatives(x, p: float, S: int, center: float = 0.0):
    """``log |beta^(alpha)(x)|`` for ``alpha = 0..S``."""
    return signed_log_derivatives(x, p, S, center)[0]


def derivatives(x, p: float, S: int, center: float = 0.0):
    """Signed derivatives (may underflow to 0 where the log form does not)."""
    x = np.asarray(x, dtype=float).ravel() - center
    out = np.zeros((S + 1, x.size))
    inside = np.abs(x) < 1
    if not np.any(inside):
        return out
    E, c, s = _expand(x[inside], p, S)
    k = np.arange(S + 1)[:, None]
    with np.errstate(over="ignore", under="ignore"):
        out[:, inside] = E * np.exp(c + gammaln(k + 1) - k * np.log(s))
    return out


def _real_axis(p: float, order: int = 32):
    e = np.concatenate([-1 + np.geomspace(1e-3, 1.0, 30), [0.0]])
    e = np.concatenate([[-1.0], e])
    e = np.concatenate([e, -e[::-1][1:]])
    return panels(np.unique(e), order)


@lru_cache(maxsize=8)
def _real_nodes(p: float):
    return _real_axis(p)


def _legs(xi: float, p: float, n_leg: int = 40, order: int = 32):
    th = np.pi / (2 * (p + 1))
    s1 = min(3 * (p * 2.0 ** (-p) / xi) ** (1 / (p + 1)), 0.8 / np.cos(th))
    s, ws = panels(np.concatenate([[0.0], s1 * np.geomspace(1e-3, 1.0, n_leg)]), order)
    dr = np.exp(1j * th)
    z = np.concatenate([-1 + s * np.conj(dr), 1 - s * dr])
    dz = np.concatenate([ws * np.conj(dr), ws * dr])
    return z, dz, s1 * np.sin(th), 1 - s1 * np.cos(th)


def fourier(xi, p: float, center: float = 0.0):
    """``FT(beta(. - center))(xi)`` and ``log M(xi)`` for an array of ``xi``.

    Returns complex values and the log majorant; ``|FT| <= exp(log M)``.
    The horizontal part of the path is integrated only where its modulus
    bound ``exp(-xi d) int |beta(x - i d)| dx`` is not negligible against
    the legs; values below double-precision range are returned as 0.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    lM = log_majorant(xi, p)
    val = np.zeros(xi.size, dtype=complex)
    xr, wr = _real_nodes(p)
    br = np.exp(log_bump(xr, p))
    xh8, wh8 = panels(np.linspace(-1.0, 1.0, 65), 8)
    for i, x in enumerate(np.abs(xi)):
        if lM[i] < -745.0:
            continue
        if x < SMALL_XI:
            val[i] = np.sum(wr * br * np.cos(xr * x))
            continue
        z, dz, depth, half = _legs(x, p)
        lf = log_bump(z, p) - 1j * z * x
        v = np.sum(np.exp(lf) * dz)
        legs_scale = logsumexp(lf.real, b=np.abs(dz))
        hb = logsumexp(log_bump(half * xh8 - 1j * depth, p).real, b=half * wh8) - x * depth
        if hb > legs_scale - 40.0:
            nh = max(64, int(half * x) + 1)
            xh, wh = panels(np.linspace(-half, half, nh + 1), 32)
            zh = xh - 1j * depth
            v += np.sum(np.exp(log_bump(zh, p) - 1j * zh * x) * wh)
        val[i] = v
    # the bump is even, so the transform is real and even in xi
    val = val.real.astype(complex)
    if center != 0.0:
        val = val * np.exp(-1j * center * xi)
    return val, lM


def log_majorant(xi, p: float, chunk: int = 512):
    """``log M(xi)``, batched; even in ``xi`` and unchanged by translations.

    On the horizontal part of the path the oscillating factor has constant
    modulus, so only the smooth ``|beta(x - i d)|`` is integrated there.
    """
    xi = np.abs(np.atleast_1d(np.asarray(xi, dtype=float)))
    out = np.empty(xi.size)
    xr, wr = _real_nodes(p)
    out[xi < SMALL_XI] = np.log(np.sum(wr * np.exp(log_bump(xr, p))))
    big = np.flatnonzero(xi >= SMALL_XI)
    th = np.pi / (2 * (p + 1))
    dr = np.exp(1j * th)
    sl, wl = panels(np.concatenate([[0.0], np.geomspace(1e-3, 1.0, 40)]), 32)
    xh, wh = panels(np.linspace(-1.0, 1.0, 65), 8)
    for lo in range(0, big.size, chunk):
        idx = big[lo:lo + chunk]
        x = xi[idx]
        s1 = np.minimum(3 * (p * 2.0 ** (-p) / x) ** (1 / (p + 1)), 0.8 / np.cos(th))
        z = 1 - (s1[:, None] * sl[None, :]) * dr
        lf = (log_bump(z, p) - 1j * z * x[:, None]).real
        legs = logsumexp(lf, b=s1[:, None] * wl[None, :], axis=1) + np.log(2.0)
        depth = s1 * np.sin(th)
        half = 1 - s1 * np.cos(th)
        zz = half[:, None] * xh[None, :] - 1j * depth[:, None]
        lh = log_bump(zz, p).real
        hor = logsumexp(lh, b=half[:, None] * wh[None, :], axis=1) - x * depth
        out[idx] = np.logaddexp(legs, hor)
    return out
