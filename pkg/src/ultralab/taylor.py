"""Truncated power-series arithmetic.

Coefficient lists hold scalars (``Fraction``, ``float``, ``complex``) or
numpy arrays of a common shape, so one recurrence serves exact rational
certificates and vectorised per-grid-point expansions alike.
"""
from __future__ import annotations

from fractions import Fraction
from typing import List, Sequence


def _zero_like(c):
    return c * 0


def mul(a: Sequence, b: Sequence, K: int) -> List:
    """Cauchy product truncated at order ``K``."""
    out = []
    for k in range(K + 1):
        acc = _zero_like(a[0] * b[0])
        for j in range(max(0, k - len(b) + 1), min(k, len(a) - 1) + 1):
            acc = acc + a[j] * b[k - j]
        out.append(acc)
    return out


def exp(u: Sequence, K: int, e0=None) -> List:
    """Coefficients of ``exp(u)`` up to order ``K``.

    ``e0`` is ``exp(u[0])``; it defaults to ``1`` which is exact when the
    caller has factored the constant term out (or when ``u[0] == 0``).
    Recurrence: ``k E_k = sum_{j=1..k} j u_j E_{k-j}``.
    """
    if e0 is None:
        e0 = _zero_like(u[0]) + 1
    E = [e0]
    for k in range(1, K + 1):
        acc = _zero_like(e0)
        for j in range(1, min(k, len(u) - 1) + 1):
            acc = acc + j * u[j] * E[k - j]
        E.append(acc / k)
    return E


def power(v: Sequence, a, K: int, w0=None) -> List:
    """Coefficients of ``v ** a`` up to order ``K`` (``v[0] != 0``).

    ``w0`` is ``v[0] ** a``; pass it explicitly for exact rational work
    where the power of the constant term is not rational.
    Recurrence: ``k v_0 w_k = sum_{j=1..k} (a j - (k - j)) v_j w_{k-j}``.
    """
    if w0 is None:
        w0 = v[0] ** a
    w = [w0]
    for k in range(1, K + 1):
        acc = _zero_like(w0)
        for j in range(1, min(k, len(v) - 1) + 1):
            acc = acc + (a * j - (k - j)) * v[j] * w[k - j]
        w.append(acc / (k * v[0]))
    return w


def binomial_series(a, K: int) -> List[Fraction]:
    """Exact coefficients of ``(1 + u) ** a`` for rational ``a``."""
    a = Fraction(a)
    out = [Fraction(1)]
    for k in range(1, K + 1):
        out.append(out[-1] * (a - k + 1) / k)
    return out


def compose_monomial(c: Sequence, degree: int, scale, K: int) -> List:
    """Series of ``f(scale * x**degree)`` given the coefficients ``c`` of ``f``."""
    zero = _zero_like(c[0])
    out = [zero] * (K + 1)
    p = scale ** 0
    for j, cj in enumerate(c):
        if j * degree > K:
            break
        out[j * degree] = cj * p
        p = p * scale
    return out
