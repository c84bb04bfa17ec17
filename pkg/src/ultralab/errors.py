"""Exception and warning types raised across ultralab."""


class UltralabError(Exception):
    """Base class for every error raised by the package."""


class WindowTooShort(UltralabError):
    """The truncated net is too short for a dyadic tail estimate."""


class IndexMismatch(UltralabError):
    pass


class OracleGap(UltralabError):
    """A derivative oracle cannot supply the requested order or point."""


class TailUnbounded(UltralabError):
    """A sup over an unbounded domain was requested without a decay certificate."""


class TailUncertified(UltralabError):
    pass


class TruncationUncertified(UltralabError):
    pass


class QuadratureDivergence(UltralabError):
    """Richardson pair disagrees beyond the requested tolerance."""


class SeriesOverflow(UltralabError):
    pass


class BoundViolated(UltralabError):
    """A bound that should hold was violated; ``witness`` carries the evidence."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class GridMismatch(UltralabError):
    pass


class NewtonStall(UltralabError):
    pass


class TruncationExceedsK(UltralabError):
    pass


class GrowthUncertified(UltralabError):
    pass


class ConfigInvalid(UltralabError):
    pass


class CacheCorrupt(UltralabError):
    pass


class CapHit(UserWarning):
    """The maximizing derivative order sits at the order cap; the sup may be unresolved."""
