"""Regularisation experiments with the mollifier nets.

The seminorm nets are bounded on the Fourier side. For a convolution
``u = f * phi_n`` with ``FT(phi_n)(xi) = w_g(xi / n)``::

    sup_x |u^(a)(x)| <= (1/pi) int_0^inf xi**a |FT f(xi)| |multiplier(xi)| dxi

so every ``p_nu^{m,mu}`` value below is an upper bound computed in the log
domain, independent of the sup window ``mu``. Direct-space quadrature
(:func:`regularize`) is kept for pointwise checks at small ``n``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from . import bump as _bump
from .core_sequences import (DEFAULT_THRESHOLDS, KSweep, SeminormNet, Thresholds,
                             UltraNormEstimate, Verdict, WeightSequence, classify_scalar_net,
                             k_sweep_null, ultra_seminorm)
from .errors import GridMismatch, OracleGap
from .flat import flat_exponent, k_exponent
from .gevrey_calculus import GevreyParams, SampledFunction
from .mollifier_factory import MollifierNet, RescaledMollifier, index_map_g, rescale
from .spectral import adaptive_sup, half_line_grid, log_leibniz, log_moments

DEFAULT_N_RANGE = (8, 16, 32, 64, 128, 256)


# ------------------------------------------------------------------ multipliers

@dataclass(frozen=True)
class FlatMultiplier:
    """``FT(phi_n)(xi) = w_{g(n) + offset}(xi / n)`` for a pow or der net."""

    kind: str
    m: float
    g_offset: int = 0

    def g(self, n: int) -> int:
        return index_map_g(n, self.m) + self.g_offset

    def log_abs(self, n: int, xi) -> np.ndarray:
        z = np.asarray(xi, dtype=float) / n
        return flat_exponent(z, self.g(n)) if self.kind == "pow" else k_exponent(z, self.g(n))

    def __call__(self, n: int, xi) -> np.ndarray:
        return np.exp(self.log_abs(n, xi)).astype(complex)

    def log_abs_one_minus(self, n: int, xi) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(-np.expm1(self.log_abs(n, xi)))


@dataclass(frozen=True)
class ShiftedMultiplier:
    """Net ``n phi^n(n x - a)``; its first moment is ``a / n``, so it is not a mollifier net."""

    base: FlatMultiplier
    shift: float

    def __post_init__(self):
        object.__setattr__(self, "base", as_multiplier(self.base))

    def __call__(self, n: int, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return self.base(n, xi) * np.exp(-1j * self.shift * xi / n)


@dataclass(frozen=True)
class GaussianKernel:
    """Fixed unit-mass Gaussian ``exp(-x**2 / 2) / sqrt(2 pi)``; not rescaled with ``n``."""

    def log_abs_one_minus(self, n: int, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(-np.expm1(-xi * xi / 2))

    def __call__(self, n: int, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return np.exp(-xi * xi / 2).astype(complex)


def as_multiplier(M) -> FlatMultiplier:
    if isinstance(M, (FlatMultiplier, ShiftedMultiplier, GaussianKernel)):
        return M
    if isinstance(M, MollifierNet):
        return FlatMultiplier(M.kind, M.m, M.g_offset)
    raise TypeError(f"cannot use {type(M).__name__} as a mollifier net")


# ------------------------------------------------------------------ fits

@dataclass
class DecayFit:
    """Per-``n`` log seminorms with the classification of the weighted net."""

    n: np.ndarray
    abscissa: np.ndarray
    log_p: np.ndarray
    estimate: UltraNormEstimate
    slopes: tuple
    k_sweep: Optional[KSweep] = None
    argmax_alpha: tuple = ()
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def verdict(self) -> Verdict:
        return self.estimate.verdict

    def trace_rows(self, w: WeightSequence):
        """Rows ``(n, n**(1/m'), log p, log p / n**(1/m'))``."""
        for n, a, lp in zip(self.n, self.abscissa, self.log_p):
            yield int(n), float(a), float(lp), float(lp / a)

    def to_csv(self, path, w: WeightSequence) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["n", "n_pow", "log_p", "log_p_over_n_pow"])
            for row in self.trace_rows(w):
                wr.writerow([repr(v) if isinstance(v, float) else v for v in row])

    def to_dict(self) -> dict:
        d = {"label": self.label, "estimate": self.estimate.to_dict(),
             "n": [int(v) for v in self.n], "log_p": [_j(v) for v in self.log_p],
             "slopes": [_j(v) for v in self.slopes],
             "argmax_alpha": list(self.argmax_alpha), **self.meta}
        if self.k_sweep is not None:
            d["k_sweep"] = {"passed": self.k_sweep.passed,
                            "estimates": {str(k): e.to_dict() for k, e in self.k_sweep.estimates.items()}}
        return d


def _j(v):
    v = float(v)
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _window_slopes(n, abscissa, log_p):
    """Least-squares slope of ``log p`` against ``n**(1/m')`` on each dyadic window."""
    N = int(n[-1])
    out = []
    for end in (N // 4, N // 2, N):
        sel = (n >= -(-end // 2)) & (n <= end) & np.isfinite(log_p)
        if sel.sum() >= 2:
            out.append(float(np.polyfit(abscissa[sel], log_p[sel], 1)[0]))
        else:
            out.append(math.nan)
    return tuple(out)


def make_fit(n, log_p, w: WeightSequence, thresholds: Thresholds = DEFAULT_THRESHOLDS,
             sweep: bool = False, label: str = "", argmax=(), **meta) -> DecayFit:
    n = np.asarray(n, dtype=np.int64)
    log_p = np.asarray(log_p, dtype=float)
    net = SeminormNet.from_log(n, log_p)
    est = ultra_seminorm(net, w, thresholds)
    ks = k_sweep_null(net, w, thresholds=thresholds) if sweep else None
    ab = w.scale(n)
    return DecayFit(n, ab, log_p, est, _window_slopes(n, ab, log_p), ks, tuple(argmax), label, meta)


# ------------------------------------------------------------------ helpers

def _log_fourier(psi: SampledFunction, xi) -> np.ndarray:
    if psi.log_fourier_bound is None:
        raise OracleGap(f"{psi.name}: no Fourier bound available")
    return np.asarray(psi.log_fourier_bound(xi), dtype=float)


@lru_cache(maxsize=16)
def _bump_majorant_on_grid(p: float) -> np.ndarray:
    return _bump.log_majorant(half_line_grid().xi, p)


def _log_fourier_on_grid(psi: SampledFunction) -> np.ndarray:
    if "p" in psi.params and psi.name.startswith("bump"):
        return _bump_majorant_on_grid(float(psi.params["p"]))
    return _log_fourier(psi, half_line_grid().xi)


def _gevrey_weights(alphas, nu, m):
    return alphas * math.log(nu) - m * gammaln(alphas + 1)


# ------------------------------------------------------------------ experiments

@dataclass
class NullDecayResult:
    fits: Dict[float, DecayFit]
    control: Optional[DecayFit] = None

    @property
    def passed(self) -> bool:
        ok = all(f.verdict is Verdict.NULL for f in self.fits.values())
        if self.control is not None:
            ok = ok and self.control.verdict is not Verdict.NULL
        return ok

    def to_dict(self):
        return {"passed": self.passed, "fits": {str(k): f.to_dict() for k, f in self.fits.items()},
                "control": None if self.control is None else self.control.to_dict()}


def null_decay_bounds(psi: SampledFunction, M, m: float, nu: float, n_range: Sequence[int],
                      cap: int = 64, roumieu: bool = False):
    """``log p_nu^{m}(psi * phi_n - psi)`` upper bounds and argmax orders."""
    mult = as_multiplier(M)
    nu_eff = 1.0 / nu if roumieu else nu
    if psi.is_zero:
        return np.full(len(n_range), -np.inf), [0] * len(n_range)
    grid = half_line_grid()
    lF = _log_fourier_on_grid(psi)
    out, arg = [], []
    for n in n_range:
        lf = lF + mult.log_abs_one_minus(n, grid.xi)
        v, k, _, _ = adaptive_sup(lambda a: log_moments(lf, a, grid), nu_eff, m, cap)
        out.append(v)
        arg.append(k)
    return np.array(out), arg


def negative_control_lower(psi: SampledFunction, kernel=GaussianKernel()) -> float:
    """``log |(psi * G - psi)(c)|`` at the bump centre, a lower bound for every seminorm."""
    grid = half_line_grid()
    c = float(psi.params.get("center", 0.0))
    F = _fourier_on_grid(psi) * np.exp(1j * c * grid.xi)  # transform of psi(. + c)
    val = float(np.sum(np.exp(grid.log_w) * (F * (kernel(1, grid.xi) - 1)).real) / math.pi)
    return math.log(abs(val))


def null_decay_experiment(psi: SampledFunction, M, params: GevreyParams, w: WeightSequence,
                          n_range: Sequence[int] = DEFAULT_N_RANGE, nus: Sequence[float] = (1, 2, 4),
                          thresholds: Thresholds = DEFAULT_THRESHOLDS, control: bool = True,
                          roumieu: bool = False) -> NullDecayResult:
    """Null protocol for ``psi * phi_n - psi`` in ``p_nu^{m,mu}`` for each ``nu``.

    ``params.nu`` is ignored in favour of ``nus``; ``params.mu`` does not enter
    because the Fourier bound holds on the whole line. The negative control
    replaces ``phi_n`` by a fixed Gaussian and uses the exact value of the
    difference at the bump centre, a lower bound for the seminorm.
    """
    fits = {}
    for nu in nus:
        lp, arg = null_decay_bounds(psi, M, params.m, nu, n_range, roumieu=roumieu)
        fits[nu] = make_fit(n_range, lp, w, thresholds, sweep=True, label=f"null-decay nu={nu}",
                            argmax=arg, nu=nu, bound="fourier-L1 upper bound")
    ctrl = None
    if control and not psi.is_zero:
        low = negative_control_lower(psi)
        ctrl = make_fit(n_range, np.full(len(n_range), low), w, thresholds,
                        label="gaussian-kernel control", bound="pointwise lower bound")
    return NullDecayResult(fits, ctrl)


@dataclass(frozen=True)
class UltraDistribution:
    """``delta^(k)`` or ``D^k F`` for a compactly supported continuous ``F``."""

    kind: str
    k: int = 0
    F: Optional[SampledFunction] = None

    def __post_init__(self):
        if self.kind not in ("delta_derivative", "derivative_of_continuous"):
            raise ValueError(f"unknown ultradistribution kind {self.kind!r}")
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.kind == "derivative_of_continuous":
            if self.F is None or self.F.tail is None or not math.isinf(self.F.tail.log_C):
                raise ValueError("F must be compactly supported (zero tail certificate)")

    @classmethod
    def delta(cls, k: int = 0) -> "UltraDistribution":
        return cls("delta_derivative", k)

    def log_fourier(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        with np.errstate(divide="ignore"):
            lk = self.k * np.log(xi) if self.k else np.zeros_like(xi)
        if self.kind == "delta_derivative":
            return lk
        return lk + _log_fourier(self.F, xi)


def _log_window_moments(kind: str, g: int, j: np.ndarray) -> np.ndarray:
    """``log (1/pi) int_0^inf xi**j w_g(xi) dxi``; closed form for ``k_g``."""
    if kind == "der":
        return gammaln((j + 1) / (2 * g)) - math.log(2 * g * math.pi)
    grid = half_line_grid()
    return log_moments(flat_exponent(grid.xi, g), j, grid)


@dataclass
class ModerateGrowthResult:
    fit: DecayFit
    raw_log_sup: np.ndarray  # alpha = 0 sup of |f * phi_n|
    exact_even: bool

    @property
    def passed(self) -> bool:
        return self.fit.verdict is Verdict.MODERATE

    def to_dict(self):
        return {"passed": self.passed, "fit": self.fit.to_dict(),
                "raw_log_sup": [_j(v) for v in self.raw_log_sup], "exact_even": self.exact_even}


def moderate_growth_experiment(f: UltraDistribution, M, params: GevreyParams, w: WeightSequence,
                               n_range: Sequence[int] = DEFAULT_N_RANGE,
                               thresholds: Thresholds = DEFAULT_THRESHOLDS,
                               roumieu: bool = False) -> ModerateGrowthResult:
    """``p_nu^{m,mu}(f * phi_n)`` against the weight ``w`` (``m' = m - 1``).

    For ``delta^(k)`` the derivative sups are ``n**(k+a+1) sup |phi^n^(k+a)|``
    and ``sup |phi^n^(j)| = (1/pi) int xi**j w_g``, attained at ``t = 0`` for
    even ``j`` (an upper bound for odd ``j``).
    """
    mult = as_multiplier(M)
    nu = 1.0 / params.nu if roumieu else params.nu
    out, arg, raw = [], [], []
    grid = half_line_grid()
    for n in n_range:
        g = mult.g(n)
        if f.kind == "delta_derivative":
            def terms(a, n=n, g=g):
                j = f.k + a
                return (j + 1) * math.log(n) + _log_window_moments(mult.kind, g, j)
        else:
            lf = f.log_fourier(grid.xi) + mult.log_abs(n, grid.xi)

            def terms(a, lf=lf):
                return log_moments(lf, a, grid)
        v, k, _, _ = adaptive_sup(terms, nu, params.m)
        out.append(v)
        arg.append(k)
        raw.append(float(terms(np.array([0]))[0]))
    fit = make_fit(n_range, out, w, thresholds, label=f"moderate-growth {f.kind} k={f.k}", argmax=arg)
    return ModerateGrowthResult(fit, np.array(raw), f.kind == "delta_derivative" and f.k % 2 == 0)


@dataclass
class WeakEqualityResult:
    n: np.ndarray
    c: np.ndarray  # signed pairing values
    log_bound: np.ndarray  # log of the L1 bound on |c_n|
    estimate: UltraNormEstimate
    k_sweep: KSweep
    verdict_source: str

    @property
    def passed(self) -> bool:
        return self.k_sweep.passed

    def to_dict(self):
        return {"passed": self.passed, "n": [int(v) for v in self.n],
                "c": [float(v) for v in self.c], "log_bound": [_j(v) for v in self.log_bound],
                "estimate": self.estimate.to_dict(), "verdict_source": self.verdict_source,
                "k_sweep": {str(k): e.to_dict() for k, e in self.k_sweep.estimates.items()}}


@lru_cache(maxsize=8)
def _bump_fourier_on_grid(p: float) -> np.ndarray:
    return _bump.fourier(half_line_grid().xi, p)[0].real


def _fourier_on_grid(psi: SampledFunction) -> np.ndarray:
    grid = half_line_grid()
    if psi.name.startswith("bump"):
        c = float(psi.params["center"])
        return _bump_fourier_on_grid(float(psi.params["p"])) * np.exp(-1j * c * grid.xi)
    if psi.fourier is None:
        raise OracleGap(f"{psi.name}: no Fourier transform")
    return np.asarray(psi.fourier(grid.xi), dtype=complex)


def pairing(M1, M2, psi: SampledFunction, n_range: Sequence[int], f: UltraDistribution = UltraDistribution.delta()):
    """``c_n = <f * phi_n - f * phi'_n, psi>`` and ``log`` of an L1 bound on ``|c_n|``.

    ``c_n = (1/pi) Re int_0^inf FT f (Phi_n - Phi'_n) conj(FT psi) dxi``.
    """
    grid = half_line_grid()
    m1, m2 = as_multiplier(M1), as_multiplier(M2)
    F = _fourier_on_grid(psi)
    lFb = _log_fourier_on_grid(psi)
    lf = f.log_fourier(grid.xi)
    sgn_f = 1j ** f.k
    wq = np.exp(grid.log_w)
    c, lb = [], []
    for n in n_range:
        if m1 == m2:
            c.append(0.0)
            lb.append(-math.inf)
            continue
        if isinstance(m1, FlatMultiplier) and isinstance(m2, FlatMultiplier):
            a1, a2 = m1.log_abs(n, grid.xi), m2.log_abs(n, grid.xi)
            hi = np.maximum(a1, a2)
            with np.errstate(divide="ignore"):
                ldiff = hi + np.log(-np.expm1(-np.abs(a1 - a2)))
            diff = np.sign(a1 - a2) * np.exp(ldiff)
        else:
            d = m1(n, grid.xi) - m2(n, grid.xi)
            with np.errstate(divide="ignore"):
                ldiff = np.log(np.abs(d))
            diff = d
        integrand = sgn_f * np.exp(lf) * diff * np.conj(F)
        c.append(float(np.sum(wq * integrand.real) / math.pi))
        tot = lf + ldiff + lFb + grid.log_w
        lb.append(float(logsumexp(tot)) - math.log(math.pi) if np.any(np.isfinite(tot)) else -math.inf)
    return np.array(c), np.array(lb)


def weak_equality_experiment(f: UltraDistribution, M1, M2, psi: SampledFunction, m: float,
                             n_range: Sequence[int] = DEFAULT_N_RANGE,
                             thresholds: Thresholds = DEFAULT_THRESHOLDS,
                             use_bound: bool = True, ks: Sequence[float] = (1, 2, 3)) -> WeakEqualityResult:
    """k-sweep Null protocol for ``c_n`` under the weight ``n**(-1/m)``.

    With ``use_bound`` the verdict is read from the L1 bound (the values
    themselves fall below double-precision resolution); otherwise from ``|c_n|``.
    """
    c, lb = pairing(M1, M2, psi, n_range, f)
    w = WeightSequence(m)
    n = np.asarray(n_range)
    if use_bound:
        net = SeminormNet.from_log(n, lb)
    else:
        with np.errstate(divide="ignore"):
            net = SeminormNet.from_log(n, np.log(np.abs(c)))
    est = classify_scalar_net(net, 1.0 / m, thresholds=thresholds)
    sweep = k_sweep_null(net, w, ks, thresholds)
    return WeakEqualityResult(n, c, lb, est, sweep, "l1-bound" if use_bound else "values")


@dataclass
class ProductResult:
    fit: DecayFit

    @property
    def passed(self) -> bool:
        return self.fit.verdict is Verdict.NULL

    def to_dict(self):
        return {"passed": self.passed, "fit": self.fit.to_dict()}


def product_consistency_check(phi: SampledFunction, psi: SampledFunction, M, params: GevreyParams,
                              w: Optional[WeightSequence] = None,
                              n_range: Sequence[int] = DEFAULT_N_RANGE,
                              thresholds: Thresholds = DEFAULT_THRESHOLDS, cap: int = 128) -> ProductResult:
    """Null protocol for ``(phi * phi_n)(psi * phi_n) - phi psi``.

    Writing ``d = u * phi_n - u`` the difference is ``phi d_psi + psi d_phi + d_phi d_psi``;
    each product is bounded by Leibniz with Fourier-side sups of the factors.
    """
    w = WeightSequence(params.m) if w is None else w
    mult = as_multiplier(M)
    n_range = list(n_range)
    if phi.is_zero or psi.is_zero:
        fit = make_fit(n_range, np.full(len(n_range), -np.inf), w, thresholds, label="product")
        return ProductResult(fit)
    grid = half_line_grid()
    l1, l2 = _log_fourier_on_grid(phi), _log_fourier_on_grid(psi)
    out, arg = [], []
    for n in n_range:
        lD = mult.log_abs_one_minus(n, grid.xi)

        def terms(a, lD=lD):
            A1, A2 = log_moments(l1, a, grid), log_moments(l2, a, grid)
            D1, D2 = log_moments(l1 + lD, a, grid), log_moments(l2 + lD, a, grid)
            t = np.logaddexp(log_leibniz(A1, D2), log_leibniz(D1, A2))
            return np.logaddexp(t, log_leibniz(D1, D2))

        v, k, _, _ = adaptive_sup(terms, params.nu, params.m, cap)
        out.append(v)
        arg.append(k)
    return ProductResult(make_fit(n_range, out, w, thresholds, sweep=True, label="product", argmax=arg))


# ------------------------------------------------------------------ direct space

@dataclass
class Regularized:
    n: int
    x: np.ndarray
    table: np.ndarray  # (S+1, len(x)) derivatives of psi * phi_n
    certificate: np.ndarray  # per-order absolute error bound


def regularize(psi: SampledFunction, M: MollifierNet, n_range: Sequence[int], S: int = 0,
               x: Optional[np.ndarray] = None) -> List[Regularized]:
    """``(psi * phi_n)^(a)(x) = sum_i w_i phi_n(s_i) psi^(a)(x - s_i)`` on the mollifier nodes.

    Raises
    ------
    GridMismatch
        If ``psi`` is tabulated without an off-grid evaluator.
    """
    if psi.derivative_evaluator is None and (S > 0 or psi.evaluator is None):
        raise GridMismatch(f"{psi.name}: tabulated input needs off-grid values for quadrature nodes")
    x = psi.grid if x is None else np.asarray(x, dtype=float)
    out = []
    for n in n_range:
        e = M.entry(n)
        r = rescale(e)
        keep = np.abs(r.weights * r.values) > 0
        s, wv, er = r.x[keep], (r.weights * r.values)[keep], (np.abs(r.weights) * r.errors)[keep]
        table = np.zeros((S + 1, x.size))
        supd = np.zeros(S + 1)
        for lo in range(0, x.size, 64):
            xx = x[lo:lo + 64]
            pts = (xx[:, None] - s[None, :]).ravel()
            D = psi.derivatives_at(pts, S).reshape(S + 1, xx.size, s.size)
            table[:, lo:lo + 64] = D @ wv
            supd = np.maximum(supd, np.abs(D).max(axis=(1, 2)))
        cert = supd * (er.sum() + e.tail_bound(0))
        out.append(Regularized(n, x, table, cert))
    return out
