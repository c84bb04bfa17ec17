"""The flat functions ``h_n`` and ``k_n`` in numerically stable form.

``h_n(z) = exp(n**2 - (n**(2n) + z**(2n)) ** (1/n))`` is evaluated as
``exp(E)`` with ``E = -n**2 expm1(log1p(u) / n)`` and ``u = (z/n)**(2n)``,
where ``log u`` is formed first so that huge ``|u|`` never overflows.
"""
from __future__ import annotations

import numpy as np

_LARGE = 30.0


def clog1p(u):
    """``log(1 + u)`` accurate for tiny complex ``u`` (Kahan's trick)."""
    u = np.asarray(u, dtype=complex)
    w = 1.0 + u
    out = np.empty_like(u)
    same = w == 1.0
    out[same] = u[same]
    ns = ~same
    out[ns] = np.log(w[ns]) * u[ns] / (w[ns] - 1.0)
    return out


def _wrap(phase):
    return np.angle(np.exp(1j * phase))


def flat_exponent(z, n: int):
    """``E`` with ``h_n(z) = exp(E)``; real for real ``z``, complex otherwise."""
    z = np.asarray(z)
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if not np.iscomplexobj(z):
        x = np.abs(z.astype(float))
        with np.errstate(divide="ignore"):
            lu = 2 * n * (np.log(x) - np.log(n))
        small = lu < _LARGE
        L = np.empty_like(lu)
        L[small] = np.log1p(np.exp(lu[small]))
        L[~small] = lu[~small] + np.log1p(np.exp(-lu[~small]))
        return -float(n * n) * np.expm1(L / n)
    zc = z.astype(complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        lz = np.log(zc / n)
    lu = 2 * n * lz.real + 1j * _wrap(2 * n * lz.imag)
    small = lu.real < _LARGE
    L = np.empty_like(lu)
    L[small] = clog1p(np.exp(lu[small]))
    L[~small] = lu[~small] + clog1p(np.exp(-lu[~small]))
    return -float(n * n) * np.expm1(L / n)


def eval_h(n: int, x):
    """``h_n(x)``; equals ``1`` at ``x = 0`` and lies in ``(0, 1]`` on the reals."""
    out = np.exp(flat_exponent(x, n))
    return out.item() if np.ndim(out) == 0 else out


def k_exponent(z, n: int):
    """``-z**(2n)`` with the power formed in the log domain for real ``z``."""
    z = np.asarray(z)
    if np.iscomplexobj(z):
        return -(z.astype(complex) ** (2 * int(n)))
    x = np.abs(z.astype(float))
    with np.errstate(divide="ignore"):
        return -np.exp(2 * int(n) * np.log(x))


def eval_k(n: int, x):
    """``k_n(x) = exp(-x**(2n))``."""
    if int(n) < 1:
        raise ValueError("n must be >= 1")
    out = np.exp(k_exponent(x, n))
    return out.item() if np.ndim(out) == 0 else out


def log_window(kind: str, xi, g: int):
    """Log of the real window ``w_g(xi)`` (``h_g`` or ``k_g``)."""
    if kind == "pow":
        return flat_exponent(np.asarray(xi, dtype=float), g)
    if kind == "der":
        return k_exponent(np.asarray(xi, dtype=float), g)
    raise ValueError(f"unknown mollifier kind {kind!r}")


def log_one_minus_window(kind: str, xi, g: int):
    """``log |w_g(xi) - 1|`` without cancellation (``-inf`` at ``xi = 0``)."""
    E = log_window(kind, xi, g)
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(E))
