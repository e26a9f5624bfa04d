"""Exception hierarchy for geometric and numerical failures.

Every error raised by the library derives from :class:`FibrationError`, so
callers (and the command line driver) can separate numerical failures from
ordinary usage errors with a single except clause.
"""

from __future__ import annotations


class FibrationError(Exception):
    """Base class for all library-specific failures."""


class InvalidCoordinate(FibrationError):
    """A coordinate was non-finite or otherwise unusable."""


class ShapeMismatch(FibrationError):
    """Operands live on incompatible tori, grids, or reference classes."""


class NotADiffeomorphism(FibrationError):
    """A Jacobian determinant check failed at some grid node."""


class InversionFailed(FibrationError):
    """Newton inversion did not reach tolerance within the iteration cap."""


class OutsideTube(FibrationError):
    """A point or graph left the tubular neighborhood of the reference fiber.

    Attributes
    ----------
    axis : int or None
        Base axis on which the offset bound was violated, if known.
    witness : tuple or None
        A concrete offending point (source coordinates), if known.
    """

    def __init__(self, message: str, axis: int | None = None, witness=None):
        super().__init__(message)
        self.axis = axis
        self.witness = witness


class NonConvergence(FibrationError):
    """An iterative 1-D minimization exceeded its iteration budget."""


class NotInChartDomain(FibrationError):
    """A diffeomorphism cannot be split into slice and vertical factors.

    Attributes
    ----------
    cause : str
        Either ``"outside_tube"`` or ``"vertical_factor_not_invertible"``.
    """

    def __init__(self, message: str, cause: str = "", witness=None):
        super().__init__(message)
        self.cause = cause
        self.witness = witness


class NotInV1(FibrationError):
    """Section exchange failed: the swapped composite is not a diffeomorphism."""


class NotInW(FibrationError):
    """Base trivialization failed: the section image misses transversality."""


class InvalidFactor(FibrationError):
    """A factor pair violates its residual bounds and cannot be assembled."""


class RankDeficient(FibrationError):
    """A differential lost full rank (smallest singular value under margin)."""


class DriftExceeded(FibrationError):
    """Transported fibers drifted off their base point beyond tolerance.

    Attributes
    ----------
    t : float
        Integration time at which the drift was measured.
    drift : float
        The measured sup drift.
    """

    def __init__(self, message: str, t: float = float("nan"),
                 drift: float = float("nan")):
        super().__init__(message)
        self.t = t
        self.drift = drift


class MaxDepthExceeded(FibrationError):
    """Adaptive path bisection hit its depth cap without a valid step."""
