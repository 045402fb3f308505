"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations

__all__ = [
    "HyperopError",
    "PoleError",
    "DomainError",
    "GammaOverflowError",
    "NoConvergenceError",
    "DecayError",
    "PrecisionCapError",
    "MultiplierRangeError",
    "BasinEscapeError",
    "RangeError",
    "RangeViolation",
    "DefectiveMatrixError",
    "SectorError",
    "CacheFormatError",
]


class HyperopError(Exception):
    """Base class of all errors raised by the engine."""


class PoleError(HyperopError, ValueError):
    """Evaluation requested exactly at a pole."""


class DomainError(HyperopError, ValueError):
    """Argument outside the domain of the operation."""


class GammaOverflowError(HyperopError, OverflowError):
    """A Gamma value exceeds the double-precision range."""


class NoConvergenceError(HyperopError, ArithmeticError):
    """An iteration, Newton solve or refinement failed to converge."""


class DecayError(HyperopError, ArithmeticError):
    """An integrand does not decay as fast as the caller asserted."""


class PrecisionCapError(HyperopError, ArithmeticError):
    """The working precision required exceeds the configured cap."""


class MultiplierRangeError(HyperopError, ArithmeticError):
    """A fixed-point multiplier lies outside the open interval (0, 1)."""


class BasinEscapeError(HyperopError, ArithmeticError):
    """Iterates left the verified basin of attraction."""


class RangeError(HyperopError, ValueError):
    """The base alpha lies outside (1, e^(1/e))."""


class RangeViolation(HyperopError, ArithmeticError):
    """A computed value breaks the range bound of the hyper-operator."""


class DefectiveMatrixError(HyperopError, ArithmeticError):
    """The eigenvector matrix is too ill-conditioned to trust."""


class SectorError(HyperopError, ValueError):
    """A matrix eigenvalue lies outside the open right half-plane."""


class CacheFormatError(HyperopError, ValueError):
    """A level cache file is malformed or has an unknown version."""
