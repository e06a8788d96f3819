"""Exception hierarchy shared by every module."""


class WeakDepError(Exception):
    """Base class for library errors."""


class InvalidParameterError(WeakDepError, ValueError):
    """A scalar argument is outside its admissible range."""


class InvalidInputError(WeakDepError, ValueError):
    """A structured input (sample, grid, config) is malformed or empty."""


class DomainError(WeakDepError, ValueError):
    """A construction precondition fails (e.g. block sizes too small)."""


class HypothesisViolationError(WeakDepError, ValueError):
    """A bound is requested outside the range where it has been proved."""


class UnsupportedRegimeError(HypothesisViolationError):
    """The composed exponent is not below one."""


class NoEnvelopeError(WeakDepError, ValueError):
    """No mixing envelope could be certified on the verification grid."""


class ResourceLimitError(WeakDepError, RuntimeError):
    """The requested computation exceeds the configured size limits."""
