"""Exception types raised by the simulation primitives.

Each class maps to one failure mode of the public API, so callers can
distinguish e.g. numerical-drift conditions (NoResidualMassError) from
genuine misuse (LengthMismatchError).
"""

from __future__ import annotations


class SpecSimError(Exception):
    """Base class for all package-specific errors."""


class AllZeroError(SpecSimError, ValueError):
    """Input vector carries no probability mass."""


class LengthMismatchError(SpecSimError, ValueError):
    """Two distributions over different alphabet sizes were combined."""


class SupportViolationError(SpecSimError, ValueError):
    """KL divergence requested where support(p) is not contained in support(q)."""


class NoResidualMassError(SpecSimError, ValueError):
    """max(p - q, 0) vanished: acceptance was certain, residual undefined."""


class DegenerateError(SpecSimError, ValueError):
    """Zeroing the rejected token would leave an empty distribution."""


class BadParamError(SpecSimError, ValueError):
    """Parameter outside its documented domain."""


class EmptySupportError(SpecSimError, ValueError):
    """Race evaluated against a distribution with no positive entries."""


class InsufficientSupportError(SpecSimError, ValueError):
    """More race arrivals requested than the distribution supports."""


class ExhaustedAlphabetError(SpecSimError, ValueError):
    """A tree node has more children than the draft row can supply."""


class TooLargeError(SpecSimError, ValueError):
    """Exhaustive oracle invoked beyond its tractable size limits."""


class InvalidMError(SpecSimError, ValueError):
    """Spread parameter m below the validity threshold of the residual bound."""


class NoDataError(SpecSimError, ValueError):
    """Acceptance estimation called with no usable counts."""


class ZeroEntropyError(SpecSimError, ValueError):
    """Token-count bound undefined for a zero-entropy acceptance distribution."""


class ConfigError(SpecSimError, ValueError):
    """Experiment configuration failed validation; message names the field."""
