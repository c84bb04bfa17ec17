"""Gevrey seminorms of sampled functions with derivative oracles.

``p_nu^{m,mu}(f) = sup_{|x|<=mu, alpha} nu**alpha / alpha!**m |f^(alpha)(x)|``
is evaluated in the log domain over a uniform grid and ``alpha <= S_max``.
The catalog supplies functions whose derivative tables come from closed
forms, Taylor recurrences, or Cauchy integrals on circles of radius 1/2.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from . import bump as _bump
from . import taylor
from .errors import CapHit, OracleGap, TailUnbounded
from .flat import flat_exponent

PROVENANCES = ("closed_form", "taylor_recurrence", "cauchy_circle", "spectral", "tabulated")


@dataclass(frozen=True)
class GevreyParams:
    m: float
    nu: float
    mu: float
    S_max: int = 30

    def __post_init__(self):
        if not self.m > 1:
            raise ValueError("Gevrey order m must exceed 1")
        if not (self.nu > 0 and self.mu > 0):
            raise ValueError("nu and mu must be positive")
        if int(self.S_max) < 1:
            raise ValueError("S_max must be >= 1")


@dataclass(frozen=True)
class TailCertificate:
    """``|f(x)| <= C exp(-a |x|**q)`` for ``|x| >= X`` (``log_C = -inf``: zero tail)."""

    X: float
    log_C: float
    a: float = 1.0
    q: float = 2.0

    def log_sup(self, beta: np.ndarray) -> np.ndarray:
        """Upper bound of ``log sup_{|x|>=X} |x**beta f(x)|``."""
        beta = np.asarray(beta, dtype=float)
        if math.isinf(self.log_C) and self.log_C < 0:
            return np.full(beta.shape, -np.inf)
        xs = np.maximum(self.X, (beta / (self.a * self.q)) ** (1.0 / self.q))
        return self.log_C + beta * np.log(xs) - self.a * xs**self.q


@dataclass
class SampledFunction:
    """Derivative table ``f^(alpha)(x_i)`` stored as ``log|.|`` plus sign.

    Optional callables give off-grid values (``evaluator``), the Fourier
    transform ``int f(x) exp(-i x xi) dx`` (``fourier``), a log upper bound
    for its modulus (``log_fourier_bound``) and off-grid derivative tables
    ``(x, S) -> array (S+1, len(x))`` (``derivative_evaluator``).
    """

    grid: np.ndarray
    log_abs: np.ndarray
    sign: np.ndarray
    provenance: str
    name: str = "tabulated"
    evaluator: Optional[Callable] = None
    fourier: Optional[Callable] = None
    log_fourier_bound: Optional[Callable] = None
    tail: Optional[TailCertificate] = None
    params: dict = field(default_factory=dict)
    derivative_evaluator: Optional[Callable] = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.log_abs = np.atleast_2d(np.asarray(self.log_abs, dtype=float))
        self.sign = np.atleast_2d(np.asarray(self.sign, dtype=float))
        if self.log_abs.shape[1] != self.grid.size or self.sign.shape != self.log_abs.shape:
            raise ValueError("derivative table does not match the grid")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def S(self) -> int:
        return self.log_abs.shape[0] - 1

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0]) if self.grid.size > 1 else 0.0

    def oracle(self, alpha: int) -> np.ndarray:
        """``f^(alpha)`` on the grid."""
        if alpha < 0 or alpha > self.S:
            raise OracleGap(f"{self.name}: no derivative of order {alpha} (table has {self.S})")
        with np.errstate(over="ignore"):
            return self.sign[alpha] * np.exp(self.log_abs[alpha])

    def __call__(self, x):
        if self.evaluator is None:
            raise OracleGap(f"{self.name}: no off-grid evaluator")
        return self.evaluator(np.asarray(x, dtype=float))

    def scaled(self, c: float) -> "SampledFunction":
        """``c * f`` with the optional callables rescaled accordingly."""
        lc = math.log(abs(c)) if c != 0 else -math.inf
        sg = math.copysign(1.0, c) if c != 0 else 0.0
        ev = None if self.evaluator is None else (lambda x, f=self.evaluator: c * f(x))
        ft = None if self.fourier is None else (lambda xi, f=self.fourier: c * f(xi))
        lb = None if self.log_fourier_bound is None else (lambda xi, f=self.log_fourier_bound: lc + f(xi))
        tail = None if self.tail is None else TailCertificate(self.tail.X, self.tail.log_C + lc, self.tail.a, self.tail.q)
        de = None if self.derivative_evaluator is None else (
            lambda x, S, f=self.derivative_evaluator: c * f(x, S))
        return SampledFunction(self.grid, self.log_abs + lc, self.sign * sg, self.provenance,
                               f"{c}*{self.name}", ev, ft, lb, tail, dict(self.params), de)

    def derivatives_at(self, x, S: int) -> np.ndarray:
        """Signed ``f^(a)(x)`` for ``a = 0..S`` at arbitrary points."""
        x = np.asarray(x, dtype=float)
        if self.derivative_evaluator is not None:
            return self.derivative_evaluator(x, S)
        if S == 0 and self.evaluator is not None:
            return self.evaluator(x)[None, :]
        raise OracleGap(f"{self.name}: no off-grid derivatives of order {S}")

    @property
    def is_zero(self) -> bool:
        return bool(np.all(np.isneginf(self.log_abs)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"] + ["f"] + [f"d{a}" for a in range(1, self.S + 1)])
            table = np.array([self.oracle(a) for a in range(self.S + 1)])
            for i, x in enumerate(self.grid):
                w.writerow([repr(float(x))] + [repr(float(v)) for v in table[:, i]])

    @classmethod
    def from_csv(cls, path, name: str = "tabulated") -> "SampledFunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        x, table = data[:, 0], data[:, 1:].T
        with np.errstate(divide="ignore"):
            return cls(x, np.log(np.abs(table)), np.sign(table), "tabulated", name)


@dataclass(frozen=True)
class SeminormValue:
    log_value: float
    alpha: int
    x: float
    cap_hit: bool

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value < 709 else math.inf


def _domain_mask(f: SampledFunction, mu: float) -> np.ndarray:
    tol = 1e-12 * max(1.0, mu)
    if f.grid[0] > -mu + tol + f.dx or f.grid[-1] < mu - tol - f.dx:
        raise OracleGap(f"{f.name}: grid [{f.grid[0]}, {f.grid[-1]}] does not span [-{mu}, {mu}]")
    return np.abs(f.grid) <= mu + tol


def _argmax(table: np.ndarray, grid: np.ndarray, S: int, what: str, name: str) -> SeminormValue:
    if np.all(np.isneginf(table)):
        return SeminormValue(-math.inf, 0, 0.0, False)
    a, i = np.unravel_index(int(np.argmax(table)), table.shape)
    cap = bool(a == S and S > 0)
    if cap:
        warnings.warn(CapHit(f"{name}: {what} attained at the cap {S}"), stacklevel=3)
    return SeminormValue(float(table[a, i]), int(a), float(grid[i]), cap)


def gevrey_seminorm(f: SampledFunction, p: GevreyParams) -> SeminormValue:
    """``log p_nu^{m,mu}(f)`` with the attaining ``(alpha, x)``."""
    S = int(p.S_max)
    if S > f.S:
        raise OracleGap(f"{f.name}: oracle covers alpha <= {f.S}, need {S}")
    mask = _domain_mask(f, p.mu)
    a = np.arange(S + 1)[:, None]
    w = a * math.log(p.nu) - p.m * gammaln(a + 1)
    table = w + f.log_abs[: S + 1][:, mask]
    return _argmax(table, f.grid[mask], S, "alpha-sup", f.name)


def roumieu_seminorm(f: SampledFunction, p: GevreyParams) -> SeminormValue:
    """``q_nu = p_{1/nu}``."""
    return gevrey_seminorm(f, GevreyParams(p.m, 1.0 / p.nu, p.mu, p.S_max))


def sigma_der(f: SampledFunction, b: float, S_max: Optional[int] = None) -> SeminormValue:
    """``log sup_{alpha, x} |f^(alpha)(x)| / (b**alpha alpha!)``."""
    S = f.S if S_max is None else int(S_max)
    if S > f.S:
        raise OracleGap(f"{f.name}: oracle covers alpha <= {f.S}, need {S}")
    a = np.arange(S + 1)[:, None]
    table = f.log_abs[: S + 1] - a * math.log(b) - gammaln(a + 1)
    return _argmax(table, f.grid, S, "alpha-sup", f.name)


def sigma_pow(f: SampledFunction, b: float, B_max: int = 200,
              tail: Optional[TailCertificate] = None) -> SeminormValue:
    """``log sup_{beta, x} |x**beta f(x)| / (b**beta beta!)`` with a certified tail.

    Raises
    ------
    TailUnbounded
        If neither ``tail`` nor ``f.tail`` bounds ``f`` beyond the grid.
    """
    cert = tail if tail is not None else f.tail
    if cert is None:
        raise TailUnbounded(f"{f.name}: sigma_pow needs a decay certificate")
    if cert.X > max(abs(f.grid[0]), abs(f.grid[-1])) + 1e-12:
        raise TailUnbounded("certificate starts beyond the grid")
    beta = np.arange(B_max + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.log(np.abs(f.grid))
        table = beta[:, None] * lx[None, :] + f.log_abs[0][None, :]
    table[0] = f.log_abs[0]  # 0**0 = 1
    table = np.nan_to_num(table, nan=-np.inf)
    norm = -beta * math.log(b) - gammaln(beta + 1)
    table = table + norm[:, None]
    tails = cert.log_sup(beta) + norm
    res = _argmax(table, f.grid, B_max, "beta-sup", f.name)
    bt = int(np.argmax(tails))
    if tails[bt] > res.log_value:
        if bt == B_max:
            warnings.warn(CapHit(f"{f.name}: tail bound attained at beta cap"), stacklevel=2)
        return SeminormValue(float(tails[bt]), bt, math.copysign(math.inf, 1.0), bt == B_max)
    return res


# ---------------------------------------------------------------- catalog

def uniform_grid(mu: float, npts: int = 2048) -> np.ndarray:
    return np.linspace(-mu, mu, npts)


def _from_signed(x, table, provenance, name, **kw) -> SampledFunction:
    table = np.asarray(table, dtype=float)
    with np.errstate(divide="ignore"):
        return SampledFunction(x, np.log(np.abs(table)), np.sign(table), provenance, name, **kw)


def constant(c: float, mu: float, S_max: int = 30, npts: int = 2048) -> SampledFunction:
    x = uniform_grid(mu, npts)
    t = np.zeros((S_max + 1, x.size))
    t[0] = c
    return _from_signed(x, t, "closed_form", f"const({c})",
                        evaluator=lambda y: np.full(np.shape(y), float(c)),
                        tail=TailCertificate(0.0, -math.inf) if c == 0 else None,
                        derivative_evaluator=lambda y, S: np.vstack(
                            [np.full(np.shape(y), float(c))] + [np.zeros(np.shape(y))] * S))


def polynomial(coeffs, mu: float, S_max: int = 30, npts: int = 2048) -> SampledFunction:
    """``sum coeffs[j] x**j``."""
    x = uniform_grid(mu, npts)
    P = np.polynomial.Polynomial(coeffs)
    t = np.array([P.deriv(a)(x) if a else P(x) for a in range(S_max + 1)])
    return _from_signed(x, t, "closed_form", f"poly{tuple(coeffs)}", evaluator=P,
                        derivative_evaluator=lambda y, S: np.array([P.deriv(a)(y) if a else P(y)
                                                                    for a in range(S + 1)]))


def sine(mu: float, S_max: int = 30, npts: int = 2048) -> SampledFunction:
    x = uniform_grid(mu, npts)
    t = np.array([np.sin(x + a * np.pi / 2) for a in range(S_max + 1)])
    return _from_signed(x, t, "closed_form", "sin", evaluator=np.sin,
                        derivative_evaluator=lambda y, S: np.array([np.sin(y + a * np.pi / 2)
                                                                    for a in range(S + 1)]))


def exponential(mu: float, S_max: int = 30, npts: int = 2048) -> SampledFunction:
    x = uniform_grid(mu, npts)
    return SampledFunction(x, np.tile(x, (S_max + 1, 1)), np.ones((S_max + 1, x.size)),
                           "closed_form", "exp", evaluator=np.exp,
                           derivative_evaluator=lambda y, S: np.tile(np.exp(y), (S + 1, 1)))


def _gaussian_table(x, a: float, S: int) -> np.ndarray:
    y = math.sqrt(a) * np.asarray(x, dtype=float)
    H = [np.ones_like(y), 2 * y]
    for k in range(1, S):
        H.append(2 * y * H[k] - 2 * k * H[k - 1])
    k = np.arange(S + 1)[:, None]
    return np.array(H[: S + 1]) * (-math.sqrt(a)) ** k * np.exp(-y * y)


def gaussian(mu: float, a: float = 1.0, S_max: int = 30, npts: int = 2048) -> SampledFunction:
    """``exp(-a x**2)``; derivatives ``(-sqrt a)**k H_k(sqrt(a) x) exp(-a x**2)``."""
    x = uniform_grid(mu, npts)
    y = math.sqrt(a) * x
    H = [np.ones_like(y), 2 * y]
    for k in range(1, S_max):
        H.append(2 * y * H[k] - 2 * k * H[k - 1])
    k = np.arange(S_max + 1)[:, None]
    with np.errstate(divide="ignore"):
        la = np.log(np.abs(np.array(H[: S_max + 1]))) + 0.5 * k * math.log(a) - y * y
    sg = np.sign(np.array(H[: S_max + 1])) * (-1.0) ** k
    return SampledFunction(
        x, la, sg, "closed_form", f"gaussian({a})",
        evaluator=lambda z: np.exp(-a * z * z),
        fourier=lambda xi: math.sqrt(math.pi / a) * np.exp(-np.asarray(xi) ** 2 / (4 * a)) + 0j,
        log_fourier_bound=lambda xi: 0.5 * math.log(math.pi / a) - np.asarray(xi) ** 2 / (4 * a),
        tail=TailCertificate(float(mu), 0.0, a, 2.0), params={"a": a},
        derivative_evaluator=lambda z, S: _gaussian_table(z, a, S))


def k_flat(n: int, mu: float, S_max: int = 30, npts: int = 2048) -> SampledFunction:
    """``k_n = exp(-x**(2n))`` by a Taylor recurrence at each grid point."""
    x = uniform_grid(mu, npts)
    N = 2 * int(n)
    j = np.arange(N + 1)
    logbin = gammaln(N + 1) - gammaln(j + 1) - gammaln(N - j + 1)
    with np.errstate(divide="ignore"):
        lx = np.log(np.abs(x))
    # scale so every |u_j| s**j <= 1
    with np.errstate(invalid="ignore"):
        r = (logbin[1:, None] + (N - j[1:, None]) * lx[None, :]) / j[1:, None]
    s = np.minimum(1.0, np.exp(-np.nanmax(np.where(np.isneginf(r), -np.inf, r), axis=0)))
    u0 = -np.abs(x) ** N
    u = [np.zeros_like(x)]
    for jj in range(1, N + 1):
        u.append(-np.exp(logbin[jj]) * x ** (N - jj) * s**jj)
    E = np.array(taylor.exp(u, S_max))
    k = np.arange(S_max + 1)[:, None]
    with np.errstate(divide="ignore"):
        la = np.log(np.abs(E)) + u0[None, :] + gammaln(k + 1) - k * np.log(s)[None, :]
    return SampledFunction(x, la, np.sign(E), "taylor_recurrence", f"k_{n}",
                           evaluator=lambda z: np.exp(-np.abs(z) ** N),
                           tail=TailCertificate(float(mu), 0.0, 1.0, float(N)), params={"n": n})


def cauchy_derivatives(fz: Callable, x: np.ndarray, S: int, radius: float = 0.5, M: int = 128):
    """``f^(alpha)(x)`` for ``alpha <= S`` from ``M`` samples on ``|z - x| = radius``."""
    if M <= S:
        raise ValueError("need more circle samples than derivative orders")
    th = 2 * np.pi * np.arange(M) / M
    z = x[:, None] + radius * np.exp(1j * th)[None, :]
    c = np.fft.fft(fz(z), axis=1) / M  # c_a = f^(a)(x) r^a / a!
    a = np.arange(S + 1)
    return (c[:, : S + 1] * np.exp(gammaln(a + 1) - a * math.log(radius))).T


def h_flat(n: int, mu: float, S_max: int = 30, npts: int = 2048) -> SampledFunction:
    """``h_n`` with derivatives from the Cauchy formula on circles of radius 1/2.

    ``h_n`` is analytic in ``|Im z| < n sin(pi / 2n)``, which is at least 1.
    """
    x = uniform_grid(mu, npts)
    D = cauchy_derivatives(lambda z: np.exp(flat_exponent(z, n)), x, S_max).real
    return _from_signed(x, D, "cauchy_circle", f"h_{n}",
                        evaluator=lambda z: np.exp(flat_exponent(np.asarray(z, dtype=float), n)),
                        params={"n": n})


def _bump_table(z, p, S, center):
    la, sg = _bump.signed_log_derivatives(z, p, S, center)
    with np.errstate(under="ignore"):
        return (sg * np.exp(la)).reshape((S + 1,) + np.shape(z))


def gevrey_bump(order: float, mu: float, center: float = 0.0, S_max: int = 30,
                npts: int = 2048) -> SampledFunction:
    """``exp(-(1 - (x - c)**2) ** (-1/(order - 1)))`` on ``|x - c| < 1``, zero elsewhere."""
    p = _bump.exponent_p(order)
    x = uniform_grid(mu, npts)
    la, sg = _bump.signed_log_derivatives(x, p, S_max, center)
    X = abs(center) + 1.0
    return SampledFunction(
        x, la, sg, "taylor_recurrence", f"bump({order},{center})",
        evaluator=lambda z: _bump.bump(z, p, center),
        fourier=lambda xi: _bump.fourier(xi, p, center)[0],
        log_fourier_bound=lambda xi: _bump.log_majorant(xi, p),
        tail=TailCertificate(X, -math.inf), params={"order": order, "center": center, "p": p},
        derivative_evaluator=lambda z, S: _bump_table(z, p, S, center))


def hat(mu: float, width: float = 1.0, npts: int = 2048) -> SampledFunction:
    """Triangle ``max(0, 1 - |x|/width)``; continuous, so only ``alpha = 0`` is tabulated."""
    x = uniform_grid(mu, npts)
    ev = lambda z: np.maximum(0.0, 1.0 - np.abs(z) / width)

    def ft(xi):
        xi = np.asarray(xi, dtype=float)
        return width * np.sinc(xi * width / (2 * np.pi)) ** 2 + 0j

    def lb(xi):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(ft(xi).real))

    return _from_signed(x, ev(x)[None, :], "closed_form", f"hat({width})", evaluator=ev,
                        fourier=ft, log_fourier_bound=lb, tail=TailCertificate(width, -math.inf),
                        params={"width": width})


CATALOG = {
    "const": constant,
    "poly": polynomial,
    "sin": sine,
    "exp": exponential,
    "gaussian": gaussian,
    "k": k_flat,
    "h": h_flat,
    "bump": gevrey_bump,
    "hat": hat,
}


def make(name: str, **params) -> SampledFunction:
    """Build a catalog function by name."""
    try:
        builder = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown catalog function {name!r}; known: {sorted(CATALOG)}") from None
    return builder(**params)
