"""Numerical toolkit for exponential-weight ultra-seminorms, mollifier nets and circle hyperfunctions."""

__version__ = "0.1.0"

from .core_sequences import (  # noqa: F401
    SeminormNet,
    Thresholds,
    UltraNormEstimate,
    Verdict,
    WeightSequence,
    ultra_seminorm,
    ultrapseudometric,
)
from .errors import UltralabError  # noqa: F401
