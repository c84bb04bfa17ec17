"""Exponential-weight ultra-seminorms on truncated nets.

A net is stored as pairs ``(n, log p_n)``; ``p_n = 0`` is ``log p_n = -inf``.
The ultra-seminorm ``limsup p_n ** r_n`` with ``r_n = n ** (-1/m')`` is
estimated by the tail maximum of ``log p_n / n ** (1/m')`` over the dyadic
window ``[ceil(N/2), N]``, read at three successive halvings of ``N``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import IndexMismatch, WindowTooShort

MIN_NET_LENGTH = 32
MIN_WINDOW_END = 8


class Verdict(str, Enum):
    NULL = "Null"
    MODERATE = "Moderate"
    DIVERGENT = "Divergent"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Thresholds:
    """Decision constants of the verdict rule."""

    tau: float = 1.0
    bound: float = 50.0
    oscillation: float = 0.5

    def __post_init__(self):
        if self.tau <= 0 or self.bound <= 0 or self.oscillation <= 0:
            raise ValueError("thresholds must be positive")


DEFAULT_THRESHOLDS = Thresholds()


def integer_floor_root(n, exponent: float) -> int:
    """``floor(n ** exponent)`` robust to values that land just below an integer."""
    x = float(n) ** exponent
    k = math.floor(x)
    frac = Fraction(exponent).limit_denominator(64)
    if isinstance(n, (int, np.integer)) and frac > 0 and abs(float(frac) - exponent) < 1e-12:
        # exact: largest k with k**q <= n**p
        p, q = frac.numerator, frac.denominator
        target = int(n) ** p
        while k > 0 and k**q > target:
            k -= 1
        while (k + 1) ** q <= target:
            k += 1
        return int(k)
    if (k + 1) - x <= 1e-9 * max(1.0, x):
        k += 1
    return int(k)


@dataclass(frozen=True)
class WeightSequence:
    """The weight ``r(n) = n ** (-1/m_prime)``; ``r(1) == 1``."""

    m_prime: float

    def __post_init__(self):
        if not (self.m_prime > 0 and math.isfinite(self.m_prime)):
            raise ValueError(f"m_prime must be a positive finite real, got {self.m_prime}")

    @classmethod
    def from_exponent(cls, exponent: float) -> "WeightSequence":
        """Weight ``n ** (-exponent)``."""
        if exponent <= 0:
            raise ValueError("exponent must be positive")
        return cls(1.0 / exponent)

    @property
    def exponent(self) -> float:
        return 1.0 / self.m_prime

    def r(self, n):
        n = np.asarray(n, dtype=float)
        if np.any(n < 1):
            raise ValueError("weights are defined for n >= 1")
        out = np.power(n, -self.exponent)
        return float(out) if out.ndim == 0 else out

    def scale(self, n):
        """``1 / r(n) = n ** (1/m_prime)``, the divisor applied to ``log p_n``."""
        n = np.asarray(n, dtype=float)
        out = np.power(n, self.exponent)
        return float(out) if out.ndim == 0 else out

    def cutoff(self, n) -> int:
        """``floor(1 / r(n))``."""
        return integer_floor_root(n, self.exponent)


@dataclass(frozen=True)
class SeminormNet:
    """Nonnegative values ``p_n`` kept as ``log p_n`` (``-inf`` for zero).

    ``+inf`` is accepted and stands for a seminorm that is infinite at that index.
    Entries are kept sorted by index, so the net is a function of the
    ``(n, p_n)`` set only.
    """

    n: np.ndarray
    log_p: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.int64).ravel()
        lp = np.asarray(self.log_p, dtype=float).ravel()
        if n.shape != lp.shape:
            raise ValueError("index and value arrays differ in length")
        if n.size == 0:
            raise ValueError("empty net")
        if np.any(n < 1):
            raise ValueError("indices must be positive integers")
        if np.any(np.isnan(lp)):
            raise ValueError("NaN seminorm value")
        order = np.argsort(n, kind="stable")
        n, lp = n[order], lp[order]
        if np.any(np.diff(n) == 0):
            raise ValueError("duplicate indices")
        n.setflags(write=False)
        lp.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "log_p", lp)

    @classmethod
    def from_values(cls, n: Sequence[int], p: Sequence[float]) -> "SeminormNet":
        p = np.asarray(p, dtype=float)
        if np.any(p < 0):
            raise ValueError("seminorm values must be nonnegative")
        with np.errstate(divide="ignore"):
            return cls(np.asarray(n), np.log(p))

    @classmethod
    def from_log(cls, n: Sequence[int], log_p: Sequence[float]) -> "SeminormNet":
        return cls(np.asarray(n), np.asarray(log_p, dtype=float))

    @property
    def N(self) -> int:
        return int(self.n[-1])

    def __len__(self):
        return int(self.n.size)

    def shifted(self, log_factor) -> "SeminormNet":
        """Net with ``log p_n + log_factor[n]`` (``-inf`` entries stay ``-inf``)."""
        with np.errstate(invalid="ignore"):
            lp = np.where(np.isneginf(self.log_p), -np.inf, self.log_p + np.asarray(log_factor, dtype=float))
        return SeminormNet(self.n, lp)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "log_p"])
            for k, v in zip(self.n, self.log_p):
                writer.writerow([int(k), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "SeminormNet":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["n", "log_p"]:
                raise ValueError(f"expected columns (n, log_p), got {reader.fieldnames}")
            rows = [(int(r["n"]), float(r["log_p"])) for r in reader]
        n, lp = zip(*rows) if rows else ((), ())
        return cls(np.asarray(n), np.asarray(lp))


def _encode(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else "-inf"
    return x


def _decode(x):
    if isinstance(x, str):
        return float(x)
    return x


@dataclass(frozen=True)
class UltraNormEstimate:
    L_hat: float
    value: float
    window_trace: tuple
    verdict: Verdict
    slack: float = 0.0
    thresholds: Thresholds = field(default=DEFAULT_THRESHOLDS)

    def to_dict(self) -> dict:
        return {
            "L_hat": _encode(float(self.L_hat)),
            "value": _encode(float(self.value)),
            "verdict": self.verdict.value,
            "window_trace": [[int(n), _encode(float(v))] for n, v in self.window_trace],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "UltraNormEstimate":
        d = json.loads(text)
        return cls(
            L_hat=_decode(d["L_hat"]),
            value=_decode(d["value"]),
            window_trace=tuple((int(n), _decode(v)) for n, v in d["window_trace"]),
            verdict=Verdict(d["verdict"]),
        )


def window_max(net: SeminormNet, w: WeightSequence, end: int) -> float:
    """``max log p_n / n**(1/m')`` over entries with ``ceil(end/2) <= n <= end``."""
    lo = -(-end // 2)
    mask = (net.n >= lo) & (net.n <= end)
    if not np.any(mask):
        raise WindowTooShort(f"no entries in window [{lo}, {end}]")
    vals = net.log_p[mask] / w.scale(net.n[mask])
    return float(np.max(vals))


def _strictly_decreasing(a, b, c):
    return a > b > c


def classify_trace(trace: Sequence[float], th: Thresholds = DEFAULT_THRESHOLDS) -> Verdict:
    """Verdict from window values ordered oldest (``N/4``) to newest (``N``)."""
    l1, l2, l3 = trace
    if all(math.isinf(v) and v < 0 for v in trace):
        return Verdict.NULL
    if _strictly_decreasing(l1, l2, l3) and l3 < -th.tau:
        return Verdict.NULL
    if math.isinf(l3) and l3 > 0:
        return Verdict.DIVERGENT
    if l1 < l2 < l3 and l3 > th.bound:
        return Verdict.DIVERGENT
    if all(-th.tau <= v <= th.bound for v in trace) and max(trace) - min(trace) <= th.oscillation:
        return Verdict.MODERATE
    return Verdict.INCONCLUSIVE


def ultra_seminorm(
    net: SeminormNet,
    w: WeightSequence,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    slack: float = 0.0,
) -> UltraNormEstimate:
    """Estimate ``limsup p_n ** r_n`` and classify the net.

    Raises
    ------
    WindowTooShort
        If the net ends before ``n = 32`` or a dyadic window is empty.
    """
    N = net.N
    if N < MIN_NET_LENGTH:
        raise WindowTooShort(f"net ends at N={N} < {MIN_NET_LENGTH}; extend the net")
    ends = [N, N // 2, N // 4]
    if ends[-1] < MIN_WINDOW_END:
        raise WindowTooShort("smallest window end below 8")
    trace = [(e, window_max(net, w, e)) for e in ends]
    L = trace[0][1]
    verdict = classify_trace([v for _, v in reversed(trace)], thresholds)
    value = math.exp(L) if L < 709.0 else math.inf
    return UltraNormEstimate(L, value, tuple(trace), verdict, slack, thresholds)


def _log_abs_diff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``log |e**a - e**b|`` without leaving the log domain."""
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    out = np.full(hi.shape, -np.inf)
    finite = np.isfinite(hi)
    gap = hi[finite] - lo[finite]
    with np.errstate(divide="ignore"):
        out[finite] = hi[finite] + np.log(-np.expm1(-gap))
    out[np.isposinf(hi) & ~np.isposinf(lo)] = np.inf
    return out


def ultrapseudometric(
    f: SeminormNet,
    g: SeminormNet,
    w: WeightSequence,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
) -> UltraNormEstimate:
    """``d(f, g)`` for scalar nets given as nonnegative values.

    The estimate carries ``slack = log 2 / ceil(N/2)**(1/m')``: the
    finite-window excess allowed in the strong triangle inequality.
    """
    if f.n.shape != g.n.shape or np.any(f.n != g.n):
        raise IndexMismatch("nets do not share an index set")
    diff = SeminormNet(f.n, _log_abs_diff(f.log_p, g.log_p))
    slack = math.log(2.0) / w.scale(-(-diff.N // 2))
    return ultra_seminorm(diff, w, thresholds, slack=slack)


def scalar_net(c: Iterable[complex], n: Sequence[int] | None = None) -> SeminormNet:
    """Net ``p_n = |c_n|`` (``n`` defaults to ``1..len(c)``)."""
    c = np.asarray(list(c) if not isinstance(c, np.ndarray) else c)
    if n is None:
        n = np.arange(1, c.size + 1)
    return SeminormNet.from_values(n, np.abs(c))


def classify_scalar_net(
    c,
    exponent: float,
    n: Sequence[int] | None = None,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
) -> UltraNormEstimate:
    """Classify ``(c_n)`` under the weight ``n ** (-exponent)``.

    ``c`` may be a sequence of scalars or an already built :class:`SeminormNet`
    (useful when ``|c_n|`` only exists in the log domain).
    """
    net = c if isinstance(c, SeminormNet) else scalar_net(c, n)
    return ultra_seminorm(net, WeightSequence.from_exponent(exponent), thresholds)


@dataclass(frozen=True)
class KSweep:
    estimates: dict
    passed: bool


def k_sweep_null(
    net: SeminormNet,
    w: WeightSequence,
    ks: Sequence[float] = (1, 2, 3),
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
) -> KSweep:
    """Null check of ``p_n * exp(k * n**(1/m'))`` for every ``k`` in ``ks``.

    Finite stand-in for "``p_n <= C_k exp(-k n**(1/m'))`` for all ``k``".
    """
    estimates = {}
    for k in ks:
        shifted = net.shifted(k * w.scale(net.n))
        estimates[k] = ultra_seminorm(shifted, w, thresholds)
    passed = all(e.verdict is Verdict.NULL for e in estimates.values())
    return KSweep(estimates, passed)
