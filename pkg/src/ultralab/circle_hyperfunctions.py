"""Laurent coefficients on the unit circle: growth classes, annulus norms, embeddings.

A function or hyperfunction on the circle is represented only by its
coefficients ``c_k``, ``|k| <= K``, stored as ``log|c_k|`` plus a phase so
that magnitudes far outside double range survive. Growth classifiers reuse
the dyadic tail-max estimator of :mod:`ultralab.core_sequences` with ``|k|``
in the role of ``n``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .core_sequences import (
    DEFAULT_THRESHOLDS,
    MIN_NET_LENGTH,
    SeminormNet,
    Thresholds,
    UltraNormEstimate,
    Verdict,
    WeightSequence,
    ultra_seminorm,
    window_max,
)
from .errors import (
    BoundViolated,
    GrowthUncertified,
    NewtonStall,
    TailUncertified,
    TruncationExceedsK,
    WindowTooShort,
)

TAU_C = 0.02
MIN_K = 64
THETA_GRID = 4096

Generator = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


# ------------------------------------------------------------------ coefficients

@dataclass(frozen=True)
class DecayCertificate:
    """``|c_k| <= exp(log_C - beta |k|**(1/m))`` for every ``k``.

    ``m = 1`` is the geometric case ``C rho0**-|k|`` with ``beta = log rho0``.
    """

    log_C: float
    beta: float
    m: float = 1.0

    def log_bound(self, k) -> np.ndarray:
        k = np.abs(np.asarray(k, dtype=float))
        return self.log_C - self.beta * k ** (1.0 / self.m)

    def _h(self, k, log_lam):
        return k * log_lam - self.beta * k ** (1.0 / self.m)

    def _dh(self, k, log_lam):
        return log_lam - self.beta / self.m * k ** (1.0 / self.m - 1.0)

    def log_weighted_sup(self, K: int, lam: float) -> float:
        """``log sup_{|k| > K} lam**|k| |c_k|`` (``inf`` if unbounded)."""
        ll = math.log(lam)
        if self.m == 1.0:
            if ll >= self.beta:
                return math.inf
            return self.log_C + self._h(K + 1, ll)
        if self.m > 1.0:
            return math.inf
        kstar = (self.m * ll / self.beta) ** (self.m / (1.0 - self.m)) if ll > 0 else 0.0
        return self.log_C + self._h(max(K + 1.0, kstar), ll)

    def log_weighted_tail_sum(self, K: int, lam: float) -> float:
        """``log sum_{|k| > K} lam**|k| |c_k|``, both signs of ``k``.

        Raises
        ------
        TailUncertified
            If the weighted terms are not yet decreasing geometrically at ``K + 1``.
        """
        ll = math.log(lam)
        if self.m > 1.0:
            raise TailUncertified("certificate exponent m > 1 gives no summable bound")
        slope = self._dh(K + 1.0, ll)
        if slope >= 0:
            raise TailUncertified(f"weighted coefficients still growing at k={K + 1}")
        # h is concave for m <= 1, so term ratios stay below exp(slope)
        first = self.log_C + self._h(K + 1.0, ll)
        return math.log(2.0) + first - math.log(-math.expm1(slope))


@dataclass
class FourierSeq:
    """Coefficients ``c_k`` for ``-K <= k <= K`` in log-magnitude/phase form.

    ``finite`` asserts that every coefficient beyond ``K`` is zero. A
    ``generator`` maps an integer array ``k`` to ``(log|c_k|, phase)`` and is
    used to extend ``K`` lazily.
    """

    log_abs: np.ndarray
    phase: np.ndarray
    generator: Optional[Generator] = None
    certificate: Optional[DecayCertificate] = None
    finite: bool = False
    name: str = ""

    def __post_init__(self):
        self.log_abs = np.asarray(self.log_abs, dtype=float)
        self.phase = np.where(np.isneginf(self.log_abs), 0.0, np.asarray(self.phase, dtype=float))
        if self.log_abs.ndim != 1 or self.log_abs.size % 2 == 0:
            raise ValueError("coefficient arrays must have odd length 2K+1")
        if self.log_abs.shape != self.phase.shape:
            raise ValueError("log_abs and phase differ in shape")
        if np.any(np.isnan(self.log_abs)):
            raise ValueError("NaN coefficient")

    # construction
    @classmethod
    def from_generator(cls, gen: Generator, K: int, **kw) -> "FourierSeq":
        la, ph = gen(np.arange(-K, K + 1))
        return cls(la, ph, generator=gen, **kw)

    @classmethod
    def from_complex(cls, c: Dict[int, complex] | Sequence[complex], K: Optional[int] = None,
                     name: str = "") -> "FourierSeq":
        """Finitely supported sequence from ``{k: c_k}`` or a centred array."""
        if not isinstance(c, dict):
            arr = np.asarray(c, dtype=complex)
            k0 = arr.size // 2
            c = {i - k0: v for i, v in enumerate(arr)}
        kmax = max([abs(k) for k in c] + [0])
        K = kmax if K is None else max(K, kmax)
        vals = np.zeros(2 * K + 1, dtype=complex)
        for k, v in c.items():
            vals[k + K] = v
        with np.errstate(divide="ignore"):
            la = np.log(np.abs(vals))
        return cls(la, np.angle(vals), finite=True, name=name)

    @classmethod
    def zero(cls, K: int = 0) -> "FourierSeq":
        return cls(np.full(2 * K + 1, -np.inf), np.zeros(2 * K + 1), finite=True, name="zero")

    # access
    @property
    def K(self) -> int:
        return self.log_abs.size // 2

    @property
    def k(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_abs) * np.exp(1j * self.phase)

    def coefficient(self, k: int) -> complex:
        if abs(k) > self.K:
            if self.finite:
                return 0j
            raise TruncationExceedsK(f"k={k} beyond K={self.K}")
        i = k + self.K
        return complex(math.exp(self.log_abs[i]) * np.exp(1j * self.phase[i])) if np.isfinite(self.log_abs[i]) else 0j

    def side(self, sign: int) -> np.ndarray:
        """``log|c_{sign k}|`` for ``k = 1..K``."""
        return self.log_abs[self.K + 1:] if sign > 0 else self.log_abs[: self.K][::-1]

    @property
    def is_zero(self) -> bool:
        return self.finite and bool(np.all(np.isneginf(self.log_abs)))

    def extended(self, K: int) -> "FourierSeq":
        """Same sequence stored to order ``K`` (zero padding if finite, generator otherwise)."""
        if K <= self.K:
            return self
        if self.finite:
            return self._resized(K)
        if self.generator is None:
            raise TruncationExceedsK(f"{self.name or 'sequence'}: K={self.K} < {K} and no generator")
        return FourierSeq.from_generator(self.generator, K, certificate=self.certificate, name=self.name)

    def as_finite(self) -> "FourierSeq":
        """The stored coefficients as a finitely supported sequence."""
        return FourierSeq(self.log_abs, self.phase, finite=True, name=self.name)

    def _resized(self, K: int) -> "FourierSeq":
        la = np.full(2 * K + 1, -np.inf)
        ph = np.zeros(2 * K + 1)
        n = min(K, self.K)
        la[K - n: K + n + 1] = self.log_abs[self.K - n: self.K + n + 1]
        ph[K - n: K + n + 1] = self.phase[self.K - n: self.K + n + 1]
        return FourierSeq(la, ph, finite=True, name=self.name)

    def truncated_view(self, K: int) -> "FourierSeq":
        """First ``K`` orders of a non-finite sequence, keeping generator and certificate."""
        d = self.K - K
        la = self.log_abs[d: self.log_abs.size - d] if d else self.log_abs
        ph = self.phase[d: self.phase.size - d] if d else self.phase
        return FourierSeq(la, ph, self.generator, self.certificate, False, self.name)

    def truncated(self, cutoff: int) -> "FourierSeq":
        """Coefficients with ``|k| <= cutoff`` kept, the rest set to zero (a finite sequence)."""
        if cutoff > self.K and not self.finite:
            return self.extended(cutoff).truncated(cutoff)
        return self._resized(cutoff)

    # io
    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "log_abs_c", "phase"])
            for k, la, ph in zip(self.k, self.log_abs, self.phase):
                wr.writerow([int(k), repr(float(la)), repr(float(ph))])

    @classmethod
    def from_csv(cls, path, finite: bool = True, name: str = "tabulated") -> "FourierSeq":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        k = np.array([int(r["k"]) for r in rows])
        K = int(np.abs(k).max()) if k.size else 0
        la = np.full(2 * K + 1, -np.inf)
        ph = np.zeros(2 * K + 1)
        for r, kk in zip(rows, k):
            la[kk + K] = float(r["log_abs_c"])
            ph[kk + K] = float(r["phase"])
        return cls(la, ph, finite=finite, name=name)


# ------------------------------------------------------------------ catalog

def _real_gen(f):
    def gen(k):
        la = f(np.abs(np.asarray(k, dtype=float)))
        return la, np.zeros_like(la)
    return gen


def geometric(p: float, K: int = MIN_K) -> FourierSeq:
    """``c_k = p**|k|`` (for ``p < 1`` the rational function ``(1 - p^2)/|1 - p z|^2`` on the circle)."""
    lp = math.log(p)
    cert = DecayCertificate(0.0, -lp, 1.0) if p < 1 else None
    return FourierSeq.from_generator(_real_gen(lambda a: a * lp), K, certificate=cert, name=f"geometric({p})")


def exp_root(K: int = MIN_K, a: float = 1.0) -> FourierSeq:
    """``c_k = exp(a sqrt|k|)``: infra-exponential growth, a hyperfunction that is not analytic."""
    return FourierSeq.from_generator(_real_gen(lambda x: a * np.sqrt(x)), K, name=f"exp_root({a})")


def stretched(beta: float, m: float, K: int = MIN_K) -> FourierSeq:
    """``c_k = exp(-beta |k|**(1/m))``, which lies in ``A_m`` for ``beta > 0``."""
    cert = DecayCertificate(0.0, beta, m) if beta > 0 else None
    return FourierSeq.from_generator(_real_gen(lambda x: -beta * x ** (1.0 / m)), K, certificate=cert,
                                     name=f"stretched({beta},{m})")


def power_of_p(p: float, m: float, K: int = MIN_K) -> FourierSeq:
    """``c_k = p**(|k|**(1/m))``."""
    return stretched(-math.log(p), m, K)


def ones(K: int = MIN_K) -> FourierSeq:
    """``c_k = 1``: the identity for :func:`star_product`."""
    return FourierSeq.from_generator(_real_gen(lambda x: np.zeros_like(x)), K, name="ones")


def monomial(j: int, coeff: complex = 1.0) -> FourierSeq:
    """``coeff * z**j``."""
    return FourierSeq.from_complex({j: coeff}, name=f"z^{j}")


def finite(coeffs: Dict[int, complex]) -> FourierSeq:
    return FourierSeq.from_complex(coeffs, name="finite")


CIRCLE_CATALOG = {
    "geometric": geometric,
    "exp_root": exp_root,
    "stretched": stretched,
    "power_of_p": power_of_p,
    "ones": ones,
    "monomial": monomial,
    "finite": finite,
}


def make_sequence(name: str, **params) -> FourierSeq:
    try:
        return CIRCLE_CATALOG[name](**params)
    except KeyError:
        raise KeyError(f"unknown circle catalog item {name!r}") from None


# ------------------------------------------------------------------ growth classifiers

class CircleClass(str, Enum):
    ANALYTIC = "Analytic"
    HYPERFUNCTION = "Hyperfunction"
    NOT_HYPERFUNCTION = "NotHyperfunction"
    INCONCLUSIVE = "Inconclusive"


def _side_trace(log_abs_side: np.ndarray, w: WeightSequence) -> List[float]:
    """Window maxima of ``log|c_k| / k**(1/m')`` ordered ``K/4, K/2, K``."""
    K = log_abs_side.size
    net = SeminormNet.from_log(np.arange(1, K + 1), log_abs_side)
    return [window_max(net, w, e) for e in (K // 4, K // 2, K)]


def _trace(c: FourierSeq, w: WeightSequence) -> List[float]:
    if c.K < MIN_K:
        raise WindowTooShort(f"K={c.K} < {MIN_K}; extend the coefficients")
    a, b = _side_trace(c.side(+1), w), _side_trace(c.side(-1), w)
    return [max(x, y) for x, y in zip(a, b)]


def aitken(trace: Sequence[float]) -> float:
    """Aitken delta-squared limit of three successive window values.

    Falls back to the last value when the differences do not form a
    contracting geometric pattern.
    """
    l1, l2, l3 = trace
    if not all(math.isfinite(v) for v in trace):
        return l3
    d1, d2 = l2 - l1, l3 - l2
    den = d2 - d1
    if d1 == 0 or den == 0 or d2 / d1 <= 0 or abs(d2 / d1) >= 1:
        return l3
    return l3 - d2 * d2 / den


@dataclass
class CircleEstimate:
    verdict: CircleClass
    estimate: float  # extrapolated limsup |c_{+-k}|**(1/k)
    raw: float  # tail-max estimate at the last window
    trace: Tuple[float, ...]  # log window values, K/4 -> K
    tau_c: float

    def to_dict(self) -> dict:
        return {"verdict": self.verdict.value, "estimate": self.estimate, "raw": self.raw,
                "log_trace": [_enc(v) for v in self.trace], "tau_c": self.tau_c}


def _enc(v):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def classify_circle_object(c: FourierSeq, tau_c: float = TAU_C) -> CircleEstimate:
    """Analytic (limsup ``|c_{+-k}|**(1/k) < 1``), hyperfunction (``<= 1``) or neither.

    The window values ``max log|c_k|/k`` over ``[K/8, K/4]``, ``[K/4, K/2]``,
    ``[K/2, K]`` are extrapolated with :func:`aitken`, which removes the
    ``k**-1/2`` approach of infra-exponential growth such as ``exp(sqrt k)``.
    """
    tr = _trace(c, WeightSequence(1.0))
    if all(math.isinf(v) and v < 0 for v in tr):
        return CircleEstimate(CircleClass.ANALYTIC, 0.0, 0.0, tuple(tr), tau_c)
    L = aitken(tr)
    est = math.exp(min(L, 700.0))
    eps = 1e-12 * max(1.0, *(abs(v) for v in tr if math.isfinite(v)))
    non_inc = tr[0] + eps >= tr[1] and tr[1] + eps >= tr[2]
    non_dec = tr[0] <= tr[1] + eps and tr[1] <= tr[2] + eps
    lo, hi = math.log1p(-tau_c), math.log1p(tau_c)
    if L < lo and non_inc:
        v = CircleClass.ANALYTIC
    elif lo <= L <= hi or (L < lo and not non_dec):
        v = CircleClass.HYPERFUNCTION
    elif L > hi and non_dec:
        v = CircleClass.NOT_HYPERFUNCTION
    else:
        v = CircleClass.INCONCLUSIVE
    return CircleEstimate(v, est, math.exp(min(tr[2], 700.0)), tuple(tr), tau_c)


@dataclass
class AmEstimate:
    m: float
    estimate: float  # limsup |c_{+-k}|**(k**(-1/m))
    log_estimate: float
    trace: Tuple[float, ...]
    member: Optional[bool]  # None when inside the tau_c band below 1
    nu_threshold: Optional[float]  # f lies in A_{m, nu'} for every nu' > nu_threshold
    finite_support_nu: Optional[int]  # A_{0,nu} with nu = max |k| of the support

    def to_dict(self) -> dict:
        return {"m": self.m, "estimate": self.estimate, "log_estimate": _enc(self.log_estimate),
                "log_trace": [_enc(v) for v in self.trace], "member": self.member,
                "nu_threshold": self.nu_threshold, "nu_threshold_is_open": True,
                "finite_support_nu": self.finite_support_nu}


def classify_Am(c: FourierSeq, m: float, tau_c: float = TAU_C) -> AmEstimate:
    """Estimate ``limsup |c_{+-k}|**(k**(-1/m))`` and the implied ``nu``.

    For an estimate ``exp(-beta) < 1`` the threshold is ``nu = (m/beta)**m``;
    membership in ``A_{m,nu'}`` is only claimed for ``nu' > nu``.
    """
    if not 0 < m < 1:
        raise ValueError("m must lie in (0, 1)")
    tr = _trace(c, WeightSequence(m))
    nz = np.nonzero(np.isfinite(c.log_abs))[0]
    fin_nu = None
    if c.finite:
        fin_nu = int(np.abs(c.k[nz]).max()) if nz.size else 0
    L = tr[2]
    if math.isinf(L) and L < 0:
        return AmEstimate(m, 0.0, L, tuple(tr), True, 0.0, fin_nu)
    est = math.exp(min(L, 700.0))
    if L < -tau_c:
        member, nu = True, (m / -L) ** m
    elif L >= 0:
        member, nu = False, None
    else:
        member, nu = None, None
    return AmEstimate(m, est, L, tuple(tr), member, nu, fin_nu)


# ------------------------------------------------------------------ lemma aaa

@dataclass
class MinimizerResult:
    m: float
    rho: float
    t_rho: float
    log_phi_at_t: float
    residual: float
    iterations: int
    gap: float  # rho**(1/m) - t_rho
    checks: Dict[str, bool] = field(default_factory=dict)
    details: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {"m": self.m, "rho": self.rho, "t_rho": self.t_rho, "log_phi_at_t": self.log_phi_at_t,
                "residual": self.residual, "iterations": self.iterations, "gap": self.gap,
                "checks": dict(self.checks), "details": dict(self.details), "passed": self.passed}


def log_phi(t, m: float, rho: float):
    """``log(rho**-t t**(m(t + 1/2)) e**(-m t))``."""
    t = np.asarray(t, dtype=float)
    return -t * math.log(rho) + m * (t + 0.5) * np.log(t) - m * t


def psi_second(t, m: float):
    """``(m/t)(1 - 1/(2t))``, the second derivative of ``log_phi``."""
    t = np.asarray(t, dtype=float)
    return m / t * (1.0 - 0.5 / t)


def _log1p_minus_x(x: float) -> float:
    """``log1p(x) - x`` without cancellation for small ``x``."""
    if abs(x) < 1e-3:
        return -sum((-x) ** j / j for j in range(2, 8))
    return math.log1p(x) - x


def lemma_aaa_minimize(m: float, rho: float, max_iter: int = 100, tol: float = 1e-12,
                       strict: bool = True) -> MinimizerResult:
    """Minimise ``phi(t) = rho**-t t**(m(t+1/2)) e**(-mt)`` over ``t >= 1/2``.

    The stationarity equation ``log t + 1/(2t) = log(rho)/m`` is solved for
    ``e = R - 1/2 - t`` with ``R = rho**(1/m)``, written as
    ``log1p(-(1/2 + e)/R) + 1/(2t) = 0`` and rearranged so that ``e ~ 1/(8R)``
    is resolved even when ``R`` is huge. Newton starts at ``e = 0`` and is kept inside the
    bracket ``t in [1/2, R]``.

    Raises
    ------
    NewtonStall
        No convergence within ``max_iter`` steps.
    BoundViolated
        A sandwich bound fails (only with ``strict``).
    """
    if not 0 < m < 1:
        raise ValueError("m must lie in (0, 1)")
    if not rho > math.e:
        raise ValueError("rho must exceed e")
    lR = math.log(rho) / m
    R = math.exp(lR)

    def F(e):
        # log1p(-u) + 1/(2t) with u = s/R, s = 1/2 + e; the -u and 1/(2t) parts
        # cancel to (s^2 - eR)/(Rt), leaving -u^2/2 - u^3/3 - ... to add
        t = R - 0.5 - e
        sv = 0.5 + e
        return (sv * sv - e * R) / R / t + _log1p_minus_x(-sv / R)

    lo, hi = -0.5, R - 1.0  # t = R and t = 1/2
    e, it, res = 0.0, 0, F(0.0)
    for it in range(1, max_iter + 1):
        t = R - 0.5 - e
        dF = -(1.0 - 0.5 / t) / t
        step = res / dF
        e_new = e - step
        if not lo < e_new < hi:
            e_new = 0.5 * (lo + hi)
        # F decreases in e: keep the bracket around the root
        f_new = F(e_new)
        if f_new > 0:
            lo = e_new
        else:
            hi = e_new
        done = abs(e_new - e) <= 1e-15 or f_new == 0.0
        e, res = e_new, f_new
        if done and abs(res) < tol:
            break
    else:
        if abs(res) >= tol:
            raise NewtonStall(f"m={m}, rho={rho}: residual {res:.3e} after {max_iter} iterations")
    t = R - 0.5 - e
    gap = 0.5 + e
    closed = 0.5 * math.log(rho) - m * (t + 0.5 + 0.25 / t)
    direct = float(log_phi(t, m, rho))
    # offsets from log(sqrt(rho) e^{-mR}) written without the O(R) terms
    delta_min = m * (e - 0.25 / t)
    x = 0.5 / R  # (R + 1) log1p(x) - 1/2 with R x = 1/2 taken out exactly
    delta_remark = m * (R * _log1p_minus_x(x) + math.log1p(x))
    upper_gap = 0.5 * math.expm1(0.5 / t)
    checks = {
        "residual": abs(res) < tol,
        "t_at_least_half": t >= 0.5,
        "gap_lower": e > 0,  # R - t > 1/2
        "gap_upper": e < upper_gap,  # R - t < e^{1/(2t)}/2
        "phi_lower": delta_min > -m / 2,
        "phi_upper": delta_min < 0,
        "closed_form": abs(closed - direct) <= 1e-10 * max(1.0, abs(closed)),
        "remark": delta_remark <= 0,
    }
    grid = np.linspace(0.5, 2 * R, 2001)
    checks["convexity"] = bool(np.all(psi_second(grid, m) >= 0))
    details = {"R": R, "e": e, "closed_form_log_phi": closed, "direct_log_phi": direct,
               "log_phi_minus_upper": delta_min, "remark_excess": delta_remark}
    out = MinimizerResult(m, rho, t, closed, abs(res), it, gap, checks, details)
    if strict:
        for key in ("gap_lower", "gap_upper", "phi_lower", "phi_upper"):
            if not checks[key]:
                raise BoundViolated(f"lemma bound {key} fails at m={m}, rho={rho}", witness=out.to_dict())
    return out


# ------------------------------------------------------------------ annulus norms

@dataclass
class AnnulusNorms:
    lam: float
    log_q: float
    log_qhat: float
    log_q_outer: float
    log_q_inner: float
    log_tail: float  # log bound on the truncated Laurent tail, -inf if exact
    grid_bound: float  # log factor covering points between theta nodes

    def to_dict(self) -> dict:
        return {k: _enc(v) if isinstance(v, float) else v for k, v in self.__dict__.items()}


def _boundary_log_max(c: FourierSeq, log_r: float, n_theta: int) -> float:
    """``log max_theta |sum c_k r**k e^{ik theta}|`` on a power-of-two grid, via FFT."""
    K = c.K
    while n_theta < 2 * K + 1:
        n_theta *= 2
    la = c.log_abs + c.k * log_r
    if np.all(np.isneginf(la)):
        return -math.inf
    s = la.max()
    a = np.exp(la - s) * np.exp(1j * c.phase)
    buf = np.zeros(n_theta, dtype=complex)
    buf[np.mod(c.k, n_theta)] = a
    vals = np.fft.ifft(buf) * n_theta
    mx = float(np.abs(vals).max())
    return s + math.log(mx) if mx > 0 else -math.inf


def annulus_norms(c: FourierSeq, lam: float, n_theta: int = THETA_GRID) -> AnnulusNorms:
    """``q^lam`` (sup over the boundary circles) and ``qhat^lam`` in log form.

    Raises
    ------
    TailUncertified
        If the sequence is not finite and carries no decay certificate.
    """
    if not lam > 1:
        raise ValueError("lambda must exceed 1")
    ll = math.log(lam)
    if c.finite:
        tail = -math.inf
    elif c.certificate is None:
        raise TailUncertified(f"{c.name or 'sequence'}: Laurent tail beyond K={c.K} has no certificate")
    else:
        tail = c.certificate.log_weighted_tail_sum(c.K, lam)
    outer = _boundary_log_max(c, ll, n_theta)
    inner = _boundary_log_max(c, -ll, n_theta)
    nt = max(n_theta, 1 << int(math.ceil(math.log2(2 * c.K + 1))))
    x = math.pi * c.K / nt
    grid = -math.log1p(-x) if x < 1 else math.inf
    q = max(outer, inner)
    if math.isfinite(tail):
        q = float(np.logaddexp(q, tail))
    return AnnulusNorms(lam, q, qhat_norm(c, lam), outer, inner, tail, grid)


def q_norm(c: FourierSeq, lam: float, n_theta: int = THETA_GRID) -> float:
    """``log q^lam(f)``: max of ``|f|`` over ``|z| = lam`` and ``|z| = 1/lam`` on a theta grid."""
    return annulus_norms(c, lam, n_theta).log_q


def qhat_norm(c: FourierSeq, lam: float) -> float:
    """``log sup_k lam**|k| |c_k|`` over the stored coefficients."""
    v = c.log_abs + np.abs(c.k) * math.log(lam)
    return float(v.max())


# ------------------------------------------------------------------ nets

def ultra_norm_circle(nets: Sequence[Tuple[int, FourierSeq]], w: WeightSequence, lam: float,
                      which: str = "qhat", thresholds: Thresholds = DEFAULT_THRESHOLDS,
                      slack: float = 0.0) -> UltraNormEstimate:
    """Ultra-norm of ``n -> q(f_n)`` (``which`` is ``"q"`` or ``"qhat"``)."""
    if which not in ("q", "qhat"):
        raise ValueError("which must be 'q' or 'qhat'")
    fn = q_norm if which == "q" else qhat_norm
    n = [int(k) for k, _ in nets]
    lp = [fn(f, lam) if not f.is_zero else -math.inf for _, f in nets]
    return ultra_seminorm(SeminormNet.from_log(n, lp), w, thresholds, slack)


def comparison_constant(lam: float, mu: float) -> float:
    """``C(lam, mu) = 1 / sum_k (mu/lam)**|k|``."""
    r = mu / lam
    return (1 - r) / (1 + r)


@dataclass
class ABAReport:
    estimates: Dict[str, UltraNormEstimate]
    per_n_ok: bool
    chain_ok: bool
    slack: float
    worst_margin: float

    @property
    def passed(self) -> bool:
        return self.per_n_ok and self.chain_ok

    def to_dict(self) -> dict:
        return {"passed": self.passed, "per_n_ok": self.per_n_ok, "chain_ok": self.chain_ok,
                "slack": self.slack, "worst_margin": self.worst_margin,
                "estimates": {k: e.to_dict() for k, e in self.estimates.items()}}


def prop_aba_check(nets: Sequence[Tuple[int, FourierSeq]], mu: float, lam: float,
                   w: WeightSequence, thresholds: Thresholds = DEFAULT_THRESHOLDS,
                   strict: bool = True) -> ABAReport:
    """Check ``C q^mu(f_n) <= qhat^lam(f_n) <= q^lam(f_n)`` and the ultra-norm chain.

    Per ``n`` the upper inequality is Cauchy's estimate; the theta grid only
    sees a lower bound of ``q^lam``, so its resolution factor is granted as
    tolerance. In the limit the factor ``C**r_n`` tends to 1; at finite ``N``
    it shows up as ``|log C| / ceil(N/8)**(1/m')`` of window slack.

    Raises
    ------
    BoundViolated
        With the first witnessing ``n`` (only with ``strict``).
    """
    if not 1 < mu < lam:
        raise ValueError("need 1 < mu < lambda")
    lC = math.log(comparison_constant(lam, mu))
    worst = math.inf
    n_vals, lq_mu, lqh, lq_lam = [], [], [], []
    ok = True
    for n, f in nets:
        if f.is_zero:
            a = b = d = -math.inf
            g = 0.0
        else:
            A, B = annulus_norms(f, mu), annulus_norms(f, lam)
            a, b, d = A.log_q, B.log_qhat, B.log_q
            g = max(A.grid_bound, B.grid_bound) + 1e-12
        n_vals.append(int(n)); lq_mu.append(a); lqh.append(b); lq_lam.append(d)
        if math.isinf(b) and math.isinf(a) and math.isinf(d):
            continue
        m1 = b - (lC + a - g)
        m2 = d + g - b
        worst = min(worst, m1, m2)
        if (m1 < 0 or m2 < 0) and ok:
            ok = False
            if strict:
                raise BoundViolated(f"per-n chain fails at n={n}",
                                    witness={"n": int(n), "log_C_q_mu": lC + a, "log_qhat_lam": b, "log_q_lam": d})
    est = {
        "q_mu": ultra_seminorm(SeminormNet.from_log(n_vals, lq_mu), w, thresholds),
        "qhat_lam": ultra_seminorm(SeminormNet.from_log(n_vals, lqh), w, thresholds),
        "q_lam": ultra_seminorm(SeminormNet.from_log(n_vals, lq_lam), w, thresholds),
    }
    N = max(n_vals)
    slack = (abs(lC) + 1e-9) / w.scale(-(-(N // 4) // 2))
    Ls = [est["q_mu"].L_hat, est["qhat_lam"].L_hat, est["q_lam"].L_hat]
    chain = all(x <= y + slack or (math.isinf(x) and x < 0) for x, y in zip(Ls, Ls[1:]))
    if not chain and strict:
        raise BoundViolated("ultra-norm chain fails", witness={"L": Ls, "slack": slack})
    return ABAReport(est, ok, chain, slack, worst)


# ------------------------------------------------------------------ projections

def star_product(a: FourierSeq, b: FourierSeq) -> FourierSeq:
    """Coefficientwise product on the common range of stored coefficients."""
    if a.finite and b.finite:
        K = max(a.K, b.K)
        a, b = a._resized(K), b._resized(K)
    else:
        K = min(x.K for x in (a, b) if not x.finite)
        if a.finite:
            K = min(K, a.K)
        if b.finite:
            K = min(K, b.K)
        a, b = (x.extended(K).truncated_view(K) if not x.finite else x._resized(K) for x in (a, b))
    fin = a.finite or b.finite
    gen = None
    if a.generator is not None and b.generator is not None and not fin:
        ga, gb = a.generator, b.generator

        def gen(k):
            la, pa = ga(k)
            lb, pb = gb(k)
            return la + lb, pa + pb
    la = a.log_abs + b.log_abs
    ph = np.where(np.isneginf(la), 0.0, a.phase + b.phase)
    return FourierSeq(la, ph, generator=gen, finite=fin, name=f"{a.name}*{b.name}")


def projector(n: int, w: WeightSequence) -> FourierSeq:
    """``psi_n = sum_{|k| <= floor(1/r_n)} z**k``."""
    c = w.cutoff(n)
    return FourierSeq(np.zeros(2 * c + 1), np.zeros(2 * c + 1), finite=True, name=f"psi_{n}")


def project_partial_sum(c: FourierSeq, n: int, w: WeightSequence) -> FourierSeq:
    """``c * psi_n``: keep ``|k| <= floor(1/r_n)``.

    Raises
    ------
    TruncationExceedsK
        If the cutoff passes ``K`` for a non-finite sequence without generator.
    """
    cut = w.cutoff(n)
    if cut > c.K and not c.finite and c.generator is None:
        raise TruncationExceedsK(f"cutoff {cut} > K={c.K}")
    return c.truncated(cut)


def laurent_product(a: FourierSeq, b: FourierSeq) -> FourierSeq:
    """Coefficients of the product of two finite Laurent polynomials."""
    if not (a.finite and b.finite):
        raise TruncationExceedsK("laurent_product needs finite sequences")
    sa = float(np.max(np.where(np.isfinite(a.log_abs), a.log_abs, -np.inf)))
    sb = float(np.max(np.where(np.isfinite(b.log_abs), b.log_abs, -np.inf)))
    if math.isinf(sa) or math.isinf(sb):
        return FourierSeq.zero(a.K + b.K)
    pa = np.exp(a.log_abs - sa) * np.exp(1j * a.phase)
    pb = np.exp(b.log_abs - sb) * np.exp(1j * b.phase)
    v = np.convolve(pa, pb)
    with np.errstate(divide="ignore"):
        la = np.log(np.abs(v)) + sa + sb
    return FourierSeq(la, np.angle(v), finite=True, name=f"{a.name}.{b.name}")


# ------------------------------------------------------------------ embeddings

@dataclass
class EmbeddingReport:
    estimate: UltraNormEstimate
    bound: float
    slack: float
    growth: CircleEstimate
    log_qhat: np.ndarray
    n: np.ndarray

    @property
    def passed(self) -> bool:
        return self.estimate.value <= self.bound + self.slack

    def to_dict(self) -> dict:
        return {"passed": self.passed, "estimate": self.estimate.to_dict(), "bound": self.bound,
                "slack": self.slack, "growth": self.growth.to_dict(),
                "n": [int(v) for v in self.n], "log_qhat": [_enc(float(v)) for v in self.log_qhat]}


def embed_hyperfunction(H: FourierSeq, w: WeightSequence, lam: float,
                        n_range: Sequence[int] = tuple(range(1, 513)), slack: float = 0.05,
                        thresholds: Thresholds = DEFAULT_THRESHOLDS) -> EmbeddingReport:
    """Net ``h_n = H * psi_n`` and its ``qhat^lam`` ultra-norm against ``lam**2``.

    Raises
    ------
    GrowthUncertified
        If ``H`` is not classified as a hyperfunction (or analytic), so that
        ``|H_k| <= C lam**|k|`` is not supported for ``lam > 1 + tau_c``.
    """
    growth = classify_circle_object(H)
    if growth.verdict not in (CircleClass.ANALYTIC, CircleClass.HYPERFUNCTION) or growth.estimate >= lam:
        raise GrowthUncertified(f"{H.name or 'H'}: growth {growth.verdict.value} with estimate "
                                f"{growth.estimate:.4g} does not support lambda={lam}")
    n_range = list(n_range)
    need = w.cutoff(max(n_range))
    if need > H.K:
        H = H.extended(need)
    nets = [(n, project_partial_sum(H, n, w)) for n in n_range]
    est = ultra_norm_circle(nets, w, lam, "qhat", thresholds)
    lq = np.array([qhat_norm(f, lam) for _, f in nets])
    return EmbeddingReport(est, lam * lam, slack, growth, lq, np.asarray(n_range))


@dataclass
class ConsistencyReport:
    tail: UltraNormEstimate
    products: Dict[str, UltraNormEstimate]

    @property
    def passed(self) -> bool:
        return self.tail.verdict is Verdict.NULL and all(e.verdict is Verdict.NULL for e in self.products.values())

    def to_dict(self) -> dict:
        return {"passed": self.passed, "tail": self.tail.to_dict(),
                "products": {k: e.to_dict() for k, e in self.products.items()}}


def _log_tail_qhat(f: FourierSeq, cut: int, lam: float) -> float:
    """``log sup_{|k| > cut} lam**|k| |f_k|`` from stored values plus the certificate."""
    ll = math.log(lam)
    mask = np.abs(f.k) > cut
    stored = float((f.log_abs[mask] + np.abs(f.k[mask]) * ll).max()) if np.any(mask) else -math.inf
    if f.finite:
        return stored
    if f.certificate is None:
        raise TailUncertified(f"{f.name or 'f'}: no certificate for coefficients beyond K={f.K}")
    return max(stored, f.certificate.log_weighted_sup(f.K, lam))


def _product_tail_net(f: FourierSeq, g: FourierSeq, w: WeightSequence, lam: float,
                      n_range: Sequence[int], K: int):
    """``log qhat^lam((f psi_n)(g psi_n) - f g)`` with ``fg`` from ``K``-truncations.

    The difference is ``f_tail g + f_head g_tail`` (``head`` = ``|k| <= cut``),
    so it is formed without cancellation. Coefficients beyond ``K`` enter
    through the certificates as an additive bound.
    """
    fK, gK = f.extended(K) if not f.finite else f, g.extended(K) if not g.finite else g
    ll = math.log(lam)
    out = []
    extra = -math.inf
    for s, other in ((fK, gK), (gK, fK)):
        if not s.finite:
            # sum_j |s_j| |o_{k-j}| over |j| > K, weighted: lam^{|k|} <= lam^{|j|} lam^{|k-j|}
            extra = np.logaddexp(extra, s.certificate.log_weighted_tail_sum(K, lam) + _log_l1_weighted(other, lam))
    for n in n_range:
        cut = w.cutoff(n)
        if cut >= max(fK.K, gK.K) and fK.finite and gK.finite:
            out.append(-math.inf)
            continue
        f_head, g_head = fK.truncated(cut), gK.truncated(cut)
        f_tail = _complement(fK, cut)
        g_tail = _complement(gK, cut)
        vals = _add(laurent_product(f_tail.as_finite(), gK.as_finite()),
                    laurent_product(f_head, g_tail.as_finite()))
        lq = qhat_norm(vals, lam) if not vals.is_zero else -math.inf
        out.append(float(np.logaddexp(lq, extra)) if math.isfinite(extra) else lq)
    return np.array(out)


def _log_l1_weighted(c: FourierSeq, lam: float) -> float:
    v = c.log_abs + np.abs(c.k) * math.log(lam)
    fin = np.isfinite(v)
    base = float(logsumexp(v[fin])) if np.any(fin) else -math.inf
    if not c.finite and c.certificate is not None:
        base = float(np.logaddexp(base, c.certificate.log_weighted_tail_sum(c.K, lam)))
    return base


def _complement(c: FourierSeq, cut: int) -> FourierSeq:
    la = np.where(np.abs(c.k) > cut, c.log_abs, -np.inf)
    return FourierSeq(la, c.phase, finite=c.finite, name=f"{c.name}_tail")


def _add(a: FourierSeq, b: FourierSeq) -> FourierSeq:
    K = max(a.K, b.K)
    a, b = a._resized(K), b._resized(K)
    s = max(float(np.max(a.log_abs)), float(np.max(b.log_abs)))
    if math.isinf(s):
        return FourierSeq.zero(K)
    v = np.exp(a.log_abs - s) * np.exp(1j * a.phase) + np.exp(b.log_abs - s) * np.exp(1j * b.phase)
    with np.errstate(divide="ignore"):
        return FourierSeq(np.log(np.abs(v)) + s, np.angle(v), finite=True)


def embedding_consistency_check(f: FourierSeq, m: float, w: WeightSequence, lam: float,
                                n_range: Sequence[int] = tuple(range(1, 513)),
                                partners: Sequence[FourierSeq] = (),
                                thresholds: Thresholds = DEFAULT_THRESHOLDS) -> ConsistencyReport:
    """Null test for the tail net ``f - f * psi_n`` under ``qhat^lam``, plus products.

    For each partner ``g`` the net ``(f psi_n)(g psi_n) - f g`` (Laurent
    products) must also be Null.
    """
    n_range = list(n_range)
    cmax = w.cutoff(max(n_range))
    K = max(f.K, 2 * cmax + 2)
    fK = f if f.finite else f.extended(K)
    lp = [_log_tail_qhat(fK, w.cutoff(n), lam) for n in n_range]
    tail = ultra_seminorm(SeminormNet.from_log(n_range, lp), w, thresholds)
    prods = {}
    for g in partners:
        lpp = _product_tail_net(f, g, w, lam, n_range, K)
        prods[g.name or "partner"] = ultra_seminorm(SeminormNet.from_log(n_range, lpp), w, thresholds)
    return ConsistencyReport(tail, prods)


def absolute_convergence_check(c: FourierSeq, lam: float, z_count: int = 16, rtol: float = 1e-12) -> bool:
    """Partial sums at points of ``|z| = lam`` form a Cauchy sequence within ``rtol``.

    Uses the last quarter of the stored coefficients as the Cauchy window.
    """
    ll = math.log(lam)
    K = c.K
    theta = np.linspace(0, 2 * np.pi, z_count, endpoint=False)
    terms = np.exp(c.log_abs + c.k * ll)[:, None] * np.exp(1j * (c.phase[:, None] + c.k[:, None] * theta))
    inner = np.exp(c.log_abs - c.k * ll)[:, None] * np.exp(1j * (c.phase[:, None] + c.k[:, None] * theta))
    ok = True
    for T in (terms, inner):
        absk = np.abs(c.k)
        total = np.abs(T).sum(axis=0)
        late = np.abs(T[absk > 3 * K // 4]).sum(axis=0)
        ok = ok and bool(np.all(late <= rtol * np.maximum(total, 1e-300)))
    return ok
