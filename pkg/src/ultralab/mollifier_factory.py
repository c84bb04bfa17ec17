"""Flat functions, the index map, and Fourier-transform mollifier nets.

``phi^n = FT(w_g) / (2 pi)`` with ``w = h`` (kind ``pow``) or ``w = k`` (kind
``der``) and ``g = g(n)``. With ``FT(w)(x) = int w(xi) exp(-i x xi) dxi`` one has
``int t**j phi^n(t) dt = i**j w^(j)(0)``, so flatness of ``w`` at the origin
is exactly the vanishing of the moments.

Samples of ``phi^n`` are computed on a shifted line ``xi - i y``::

    phi^n(t) = exp(-t y) / pi * Re int_0^Xi w(xi - i y) exp(-i t xi) dxi

with ``y`` picked per ``t`` to minimise ``log int |w(xi - i y)| - t y``. The
rounding error of each sample is then relative to ``exp(-t y)`` instead of
to ``int |w|``, which keeps high moments meaningful.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy.special import gammaincc, gammaln, logsumexp

from . import taylor
from .cache import Cache, key_name
from .core_sequences import integer_floor_root
from .errors import (BoundViolated, CacheCorrupt, QuadratureDivergence, SeriesOverflow,
                     TruncationUncertified)
from .flat import eval_h, eval_k, flat_exponent, k_exponent
from .gevrey_calculus import GevreyParams, TailCertificate, SampledFunction, sigma_pow
from .quadrature import bisect, panels

__all__ = [
    "eval_h", "eval_k", "index_map_g", "moment_order", "FlatFunctionSpec",
    "certify_flatness", "certify_uniform_bounds", "GridSpec", "MollifierEntry",
    "build_mollifier", "rescale", "MollifierNet", "window_taylor", "dual_moments",
]

KINDS = ("pow", "der")
SERIES_CAP = 16


def index_map_g(n: int, m: float) -> int:
    """``g(n) = floor(floor(n**(1/(m-1))) / 2) + 1``."""
    if n < 1 or not m > 1:
        raise ValueError("need n >= 1 and m > 1")
    return integer_floor_root(n, 1.0 / (m - 1.0)) // 2 + 1


def moment_order(n: int, m: float) -> int:
    """``floor(n**(1/m)) + 1``."""
    return integer_floor_root(n, 1.0 / m) + 1


def singularity_clearance(n) -> np.ndarray:
    """``n sin(pi / 2n)``: distance of the singularities of ``h_n`` from the real axis."""
    n = np.asarray(n, dtype=float)
    return n * np.sin(np.pi / (2 * n))


@dataclass(frozen=True)
class FlatFunctionSpec:
    kind: str  # "h" or "k"
    n: int

    def __post_init__(self):
        if self.kind not in ("h", "k"):
            raise ValueError("kind must be 'h' or 'k'")
        if int(self.n) < 1:
            raise ValueError("n must be >= 1")

    def __call__(self, x):
        return eval_h(self.n, x) if self.kind == "h" else eval_k(self.n, x)


def _window_letter(kind: str) -> str:
    return {"pow": "h", "der": "k", "h": "h", "k": "k"}[kind]


def window_taylor(kind: str, n: int, K: int) -> List[Fraction]:
    """Exact Taylor coefficients at 0 of ``h_n`` or ``k_n`` up to order ``K``."""
    letter = _window_letter(kind)
    N = 2 * n
    if letter == "k":
        inner = [Fraction(0)] * (K + 1)
        if N <= K:
            inner[N] = Fraction(-1)
    else:
        # E = n^2 (1 - (1 + u)^(1/n)), u = x^(2n) / n^(2n)
        b = taylor.binomial_series(Fraction(1, n), K // N + 1)
        E_u = [Fraction(0)] + [-n * n * c for c in b[1:]]
        inner = taylor.compose_monomial(E_u, N, Fraction(1, n**N), K)
    return taylor.exp(inner, K, Fraction(1))


@dataclass(frozen=True)
class FlatnessReport:
    kind: str
    n: int
    derivatives: tuple  # exact h^(a)(0) or k^(a)(0), a = 0..order_cap + 1
    vanishing_orders: tuple
    first_nonzero: int
    passed: bool

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "passed": self.passed,
                "first_nonzero_order": self.first_nonzero,
                "vanishing_orders": list(self.vanishing_orders),
                "derivatives": [str(d) for d in self.derivatives]}


def certify_flatness(kind: str, n: int, order_cap: Optional[int] = None,
                     series_cap: int = SERIES_CAP) -> FlatnessReport:
    """Exact check that derivatives of orders ``1..order_cap`` vanish at 0.

    Raises
    ------
    SeriesOverflow
        For ``n`` beyond ``series_cap``.
    """
    if n > series_cap:
        raise SeriesOverflow(f"n={n} exceeds the exact-series cap {series_cap}")
    cap = 2 * n - 1 if order_cap is None else int(order_cap)
    if cap > 2 * n - 1:
        raise ValueError("order_cap must not exceed 2n - 1")
    K = 2 * n
    coeffs = window_taylor(kind, n, K)
    ders = tuple(c * math.factorial(a) for a, c in enumerate(coeffs))
    vanish = tuple(a for a in range(1, cap + 1) if ders[a] == 0)
    first = next((a for a in range(1, K + 1) if ders[a] != 0), -1)
    passed = len(vanish) == cap and ders[0] == 1
    return FlatnessReport(_window_letter(kind), n, ders, vanish, first, passed)


@dataclass
class UniformBoundReport:
    kind: str
    n_range: tuple
    bound_name: str
    per_n: Dict[int, float]
    limit: float
    passed: bool
    witness: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"kind": self.kind, "n_range": list(self.n_range), "bound": self.bound_name,
                "limit": self.limit, "passed": self.passed, "witness": self.witness,
                "per_n": {str(k): v for k, v in self.per_n.items()}, **self.extra}


def max_circle_exponent(n: int, x: np.ndarray, radius: float = 0.5, n_theta: int = 256):
    """``max Re E`` over ``x + radius e^{i theta}`` and the maximising point."""
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    z = x[:, None] + radius * np.exp(1j * th)[None, :]
    R = flat_exponent(z, n).real
    i, j = np.unravel_index(int(np.argmax(R)), R.shape)
    return float(R[i, j]), float(x[i]), float(th[j])


def certify_uniform_bounds(kind: str, n_range: Iterable[int] = range(1, 41), *,
                           npts: int = 801, n_theta: int = 256, b: float = 1.0,
                           raise_on_fail: bool = True) -> UniformBoundReport:
    """Uniform bounds of ``sigma_2(h_n)`` (kind ``h``) or ``sigma^b(k_n)`` (kind ``k``).

    For ``h`` the Cauchy estimate ``|h^(a)(x)| <= 2**a a! max_theta |h(x + e^{i theta}/2)|``
    reduces ``sigma_2`` to ``exp(max Re E)`` on circles of radius 1/2 centred on
    ``[0, 2n + 3]`` (``h_n`` is even and real on the axis). Past ``2n + 3``
    the real part keeps falling like ``n**2 - x**2``. The limit is 3 and
    ``max Re E < 1`` is recorded as well.
    """
    letter = _window_letter(kind)
    ns = list(n_range)
    per_n: Dict[int, float] = {}
    witness = None
    if letter == "h":
        reE = {}
        for n in ns:
            x = np.linspace(0.0, 2 * n + 3.0, npts)
            r, xw, tw = max_circle_exponent(n, x, 0.5, n_theta)
            reE[n] = r
            per_n[n] = math.exp(r)
            if (r >= 1.0 or per_n[n] >= 3.0) and witness is None:
                witness = {"n": n, "x": xw, "theta": tw, "max_re_exponent": r}
        passed = witness is None
        rep = UniformBoundReport("h", tuple(ns), "sigma_2", per_n, 3.0, passed, witness,
                                 {"max_re_exponent": {str(k): v for k, v in reE.items()},
                                  "re_exponent_limit": 1.0})
    else:
        for n in ns:
            x = np.linspace(-6.0, 6.0, 2 * 1200 + 1)
            f = SampledFunction(x, k_exponent(x, n)[None, :], np.ones((1, x.size)),
                                "closed_form", f"k_{n}")
            # |x| > 2: x^beta exp(-x^{2n}) decreases past (beta / 2n)^{1/2n}
            cert = TailCertificate(2.0, 0.0, 1.0, 2.0 * n)
            sv = sigma_pow(f, b, B_max=200, tail=cert)
            per_n[n] = sv.log_value
        C = math.exp(max(per_n.values()))
        passed = math.isfinite(C)
        rep = UniformBoundReport("k", tuple(ns), f"sigma^{b}", {k: math.exp(v) for k, v in per_n.items()},
                                 C, passed, None, {"b": b, "C": C})
    if raise_on_fail and not rep.passed:
        raise BoundViolated(f"uniform bound failed for {letter}", witness)
    return rep


# ------------------------------------------------------------------ sampling

@dataclass(frozen=True)
class GridSpec:
    """Discretisation of the build; ``None`` fields are chosen automatically."""

    order: int = 16
    xi_panel: Optional[float] = None
    t_panel: Optional[float] = None
    t_max: Optional[float] = None
    n_shift: int = 24
    log_floor: float = -60.0
    rtol: float = 1e-8

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


def _log_w(kind: str, z, g: int):
    return flat_exponent(z, g) if kind == "pow" else k_exponent(z, g)


def _y_max(kind: str, g: int) -> float:
    if kind == "pow":
        return 0.9 * g * math.sin(math.pi / (2 * g))
    # below the first hill of exp(-z^{2g}) at arg z = -pi / 2g
    return 0.8 * math.sin(math.pi / (2 * g))


def _cutoff(kind: str, g: int, ys: np.ndarray, floor: float) -> float:
    """First ``Xi`` past which ``log |w(xi - i y)| < floor`` for every ``y``."""
    if kind == "pow":
        top = g + math.sqrt(g * g - floor + 20) + 5
    else:
        # |exp(-z^{2g})| < e^{floor} once |z|^{2g} clears -floor with margin
        top = max(4.0, 3.0 * g * float(ys.max()), (20.0 - floor) ** (1.0 / (2 * g)) + float(ys.max()))
    xi = np.linspace(0.0, top, 4001)
    L = _log_w(kind, xi[:, None] - 1j * ys[None, :], g).real.max(axis=1)
    above = np.flatnonzero(L >= floor)
    if above.size == 0:
        return float(xi[1])
    if above[-1] == xi.size - 1:
        raise TruncationUncertified(f"{kind} g={g}: window still above e^{floor} at xi={top}")
    return float(xi[above[-1] + 1])


@dataclass
class MollifierEntry:
    """Samples of ``phi^n`` on symmetric quadrature nodes with error bounds."""

    kind: str
    m: float
    n: int
    g: int
    t: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    Xi: float
    imag_residue: float
    tail_y: float
    tail_logA: float
    grid_hash: str
    t_richardson: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return float(self.t.max())

    def moment(self, j: int) -> float:
        if j % 2:
            return 0.0  # paired +-t nodes with equal values cancel exactly
        return float(np.sum(self.weights * self.t**j * self.values))

    def abs_moment(self, j: int) -> float:
        return float(np.sum(self.weights * np.abs(self.t) ** j * np.abs(self.values)))

    def tail_bound(self, j: int) -> float:
        """Bound on ``int_{|t| > T} |t|**j |phi^n|`` from ``|phi^n(t)| <= e^{A - t y} / pi``."""
        y, T = self.tail_y, self.T
        lg = gammaln(j + 1) + math.log(max(gammaincc(j + 1, y * T), 1e-300))
        return 2 * math.exp(self.tail_logA + lg - (j + 1) * math.log(y)) / math.pi

    def certificate(self, j: int) -> float:
        """Combined bound on the error of ``moment(j)``."""
        sample = float(np.sum(self.weights * np.abs(self.t) ** j * self.errors))
        rich = self.t_richardson.get(j, 0.0)
        return sample + rich + self.tail_bound(j) + 4 * np.finfo(float).eps * self.abs_moment(j)

    def arrays(self) -> dict:
        return {"t": self.t, "weights": self.weights, "values": self.values, "errors": self.errors}

    def meta(self) -> dict:
        return {"kind": self.kind, "m": self.m, "n": self.n, "g": self.g, "Xi": self.Xi,
                "imag_residue": self.imag_residue, "tail_y": self.tail_y,
                "tail_logA": self.tail_logA, "grid_hash": self.grid_hash,
                "t_richardson": {str(k): v for k, v in self.t_richardson.items()}}

    @classmethod
    def from_cache(cls, arrays, meta) -> "MollifierEntry":
        meta = dict(meta)
        meta.pop("sha256", None)
        rich = {int(k): v for k, v in meta.pop("t_richardson").items()}
        return cls(t=arrays["t"], weights=arrays["weights"], values=arrays["values"],
                   errors=arrays["errors"], t_richardson=rich, **meta)


def _line_integrals(kind, g, y, t, xi, wx, Xi, chunk=256):
    """``Re int_0^Xi w(xi - i y) e^{-i t xi}`` for every ``t`` (no ``e^{-ty}`` factor)."""
    wv = np.exp(_log_w(kind, xi - 1j * y, g)) * wx
    out = np.empty(t.size)
    for lo in range(0, t.size, chunk):
        tt = t[lo:lo + chunk]
        out[lo:lo + chunk] = (np.exp(-1j * np.outer(tt, xi)) @ wv).real
    return out


def _sample(kind, g, t, ys, logA, xi_edges, spec: GridSpec, Xi):
    """``phi(t)`` and per-sample error bounds on the nodes ``t >= 0``."""
    choice = np.argmin(logA[None, :] - np.outer(t, ys), axis=1)
    vals = np.empty(t.size)
    errs = np.empty(t.size)
    xc, wc = panels(xi_edges, spec.order)
    xf, wf = panels(bisect(xi_edges), spec.order)
    for c in np.unique(choice):
        sel = np.flatnonzero(choice == c)
        y = ys[c]
        fine = _line_integrals(kind, g, y, t[sel], xf, wf, Xi)
        coarse = _line_integrals(kind, g, y, t[sel], xc, wc, Xi)
        # truncation past Xi: integrand below e^{log_floor} and Gaussian-or-faster decay
        trunc = math.exp(spec.log_floor)
        env = np.exp(-t[sel] * y) / math.pi
        vals[sel] = env * fine
        errs[sel] = env * (np.abs(fine - coarse) + trunc + 8 * np.finfo(float).eps * math.exp(logA[c]))
    return vals, errs


def build_mollifier(kind: str, m: float, n: int, grid_spec: GridSpec = GridSpec(),
                    moment_check: Optional[int] = None, cache: Optional[Cache] = None) -> MollifierEntry:
    """Sample ``phi^n`` for ``kind`` in ``{"pow", "der"}`` with error certificates.

    Raises
    ------
    TruncationUncertified
        If the window does not fall below ``e^{log_floor}`` on the scan range.
    QuadratureDivergence
        If a refinement pair disagrees beyond ``grid_spec.rtol``.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    g = index_map_g(n, m)
    key = key_name(kind=kind, m=m, n=n, grid=grid_spec.digest())
    if cache is not None:
        try:
            hit = cache.read(key)
        except CacheCorrupt:
            hit = None  # rebuilt below and overwritten atomically
        if hit is not None:
            return MollifierEntry.from_cache(*hit)
    spec = grid_spec
    jmax = moment_check if moment_check is not None else moment_order(n, m) + 1
    ys = np.concatenate([[0.0], np.linspace(0, _y_max(kind, g), spec.n_shift + 1)[1:]])
    Xi = _cutoff(kind, g, ys, spec.log_floor)
    xi_panel = spec.xi_panel
    if xi_panel is None:
        xi_panel = 0.05 if kind == "pow" else min(0.05, 0.5 / g)
    # log int_0^Xi |w(xi - i y)| for every shift
    e0 = np.linspace(0.0, Xi, max(8, int(math.ceil(Xi / xi_panel))) + 1)
    x0, w0 = panels(e0, spec.order)
    lw = _log_w(kind, x0[:, None] - 1j * ys[None, :], g).real
    logA = logsumexp(lw, b=w0[:, None], axis=0)
    # t range: the envelope e^{A - T y} T^j must be negligible
    if spec.t_max is not None:
        T = float(spec.t_max)
    else:
        T = 1.0
        best = lambda T: float(np.min(logA - T * ys))
        while best(T) + jmax * math.log(T) > -40.0:
            T *= 1.25
            if T > 1e4:
                raise TruncationUncertified("t range does not close")
    t_panel = spec.t_panel if spec.t_panel is not None else min(2.0, 8.0 / Xi)
    t_edges = np.linspace(0.0, T, max(4, int(math.ceil(T / t_panel))) + 1)
    tc, twc = panels(t_edges, spec.order)
    tf, twf = panels(bisect(t_edges), spec.order)
    # the xi rule must resolve e^{-i T xi}
    xi_panel = min(xi_panel, 8.0 / T)
    xi_edges = np.linspace(0.0, Xi, max(8, int(math.ceil(Xi / xi_panel))) + 1)
    vf, ef = _sample(kind, g, tf, ys, logA, xi_edges, spec, Xi)
    vc, _ = _sample(kind, g, tc, ys, logA, xi_edges, spec, Xi)
    rich = {}
    for j in range(0, jmax + 1, 2):
        a = 2 * float(np.sum(twf * tf**j * vf))
        b = 2 * float(np.sum(twc * tc**j * vc))
        scale = 2 * float(np.sum(twf * tf**j * np.abs(vf)))
        if abs(a - b) > spec.rtol * max(scale, 1e-300) + 1e-14 * scale:
            raise QuadratureDivergence(f"{kind} n={n}: t-refinement pair differs at j={j}")
        rich[j] = abs(a - b)
    # symmetry audit on a sample of t: the full-line integral has no imaginary part
    probe = tf[:: max(1, tf.size // 16)]
    xf, wf = panels(bisect(xi_edges), spec.order)
    xs = np.concatenate([-xf[::-1], xf])
    wxs = np.concatenate([wf[::-1], wf])
    resid = 0.0
    for tt in probe:
        c = int(np.argmin(logA - tt * ys))
        f = np.exp(_log_w(kind, xs - 1j * ys[c], g) - 1j * tt * xs) * wxs
        resid = max(resid, float(abs(np.sum(f).imag) / np.sum(np.abs(f))))
    # tail parameters: any admissible shift bounds |phi| beyond T
    ct = int(np.argmin(logA - T * ys))
    if ys[ct] == 0.0:
        ct = int(np.argmax(ys))
    t_sym = np.concatenate([-tf[::-1], tf])
    entry = MollifierEntry(
        kind=kind, m=float(m), n=int(n), g=g, t=t_sym,
        weights=np.concatenate([twf[::-1], twf]),
        values=np.concatenate([vf[::-1], vf]),
        errors=np.concatenate([ef[::-1], ef]),
        Xi=Xi, imag_residue=resid, tail_y=float(ys[ct]), tail_logA=float(logA[ct]),
        grid_hash=spec.digest(), t_richardson=rich)
    if cache is not None:
        cache.write(key, entry.arrays(), entry.meta())
    return entry


def dual_moments(kind: str, g: int, jmax: int) -> np.ndarray:
    """``int t**j phi = i**j j! a_j`` from exact Taylor coefficients (real for even ``j``)."""
    a = window_taylor(kind, g, jmax)
    out = np.zeros(jmax + 1)
    for j in range(jmax + 1):
        if j % 2 == 0:
            out[j] = float((-1) ** (j // 2) * math.factorial(j) * a[j])
    return out


@dataclass(frozen=True)
class MomentReport:
    kind: str
    n: int
    g: int
    moments: tuple
    certificates: tuple
    dual: tuple
    scales: tuple
    within_certificate: bool
    dual_agrees: bool
    imag_residue: float

    @property
    def passed(self) -> bool:
        return self.within_certificate and self.dual_agrees and self.imag_residue < 1e-12

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()} | {"passed": self.passed}


def moment_report(entry: MollifierEntry, jmax: Optional[int] = None, dual_rtol: float = 1e-10) -> MomentReport:
    """Moment ladder ``j = 0..moment_order`` against certificate and the dual route.

    The dual check compares ``|quadrature - dual|`` with ``dual_rtol`` times
    ``max(|dual|, int |t|**j |phi^n|)``.
    """
    J = moment_order(entry.n, entry.m) if jmax is None else jmax
    mom = [entry.moment(j) for j in range(J + 1)]
    cert = [entry.certificate(j) for j in range(J + 1)]
    dual = dual_moments(entry.kind, entry.g, J)
    scale = [entry.abs_moment(j) for j in range(J + 1)]
    within = abs(mom[0] - 1.0) <= cert[0] and all(abs(mom[j]) <= cert[j] for j in range(1, J + 1))
    agree = all(abs(mom[j] - dual[j]) <= dual_rtol * max(abs(dual[j]), scale[j]) for j in range(J + 1))
    return MomentReport(entry.kind, entry.n, entry.g, tuple(mom), tuple(cert), tuple(dual.tolist()),
                        tuple(scale), bool(within), bool(agree), entry.imag_residue)


@dataclass(frozen=True)
class RescaledMollifier:
    """``phi_n(x) = n phi^n(n x)`` on the nodes ``t / n``."""

    n: int
    x: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    errors: np.ndarray

    @property
    def radius(self) -> float:
        return float(np.max(np.abs(self.x)))


def rescale(entry: MollifierEntry, n: Optional[int] = None) -> RescaledMollifier:
    n = entry.n if n is None else int(n)
    return RescaledMollifier(n, entry.t / n, entry.weights / n, entry.values * n, entry.errors * n)


@dataclass
class MollifierNet:
    """``(phi^n)_n`` of one kind; entries are built on demand and then frozen."""

    kind: str
    m: float
    grid_spec: GridSpec = GridSpec()
    cache: Optional[Cache] = None
    entries: Dict[int, MollifierEntry] = field(default_factory=dict)
    g_offset: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")

    def g(self, n: int) -> int:
        return index_map_g(n, self.m) + self.g_offset

    def moment_order(self, n: int) -> int:
        return moment_order(n, self.m)

    def entry(self, n: int) -> MollifierEntry:
        if n not in self.entries:
            if self.g_offset:
                raise NotImplementedError("sampled entries are built for the plain index map only")
            self.entries[n] = build_mollifier(self.kind, self.m, n, self.grid_spec, cache=self.cache)
        return self.entries[n]

    def build(self, n_range: Sequence[int]) -> "MollifierNet":
        for n in n_range:
            self.entry(n)
        return self

    def log_window(self, n: int, xi) -> np.ndarray:
        """``log FT(phi_n)(xi) = log w_g(xi / n)``."""
        return _log_w(self.kind, np.asarray(xi, dtype=float) / n, self.g(n))
