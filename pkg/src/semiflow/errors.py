"""Exception hierarchy."""

from __future__ import annotations


class SemiflowError(Exception):
    """Base class for all errors raised by semiflow."""


class DimensionMismatch(SemiflowError, ValueError):
    """State dimension or discretization does not match the model."""


class PreconditionError(SemiflowError, ValueError):
    """An operation was called outside its documented domain."""


class UnboundedTail(SemiflowError):
    """Trajectory blew up or grew without bound in an omega-limit window."""


class DeformationCollapse(SemiflowError):
    """Every interior node of a path blew up during one deformation."""

    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = records or []


class ConfigurationRejected(SemiflowError, ValueError):
    """A model or forcing violates a structural hypothesis.

    ``details`` carries the offending margins so callers can report them.
    """

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class ConfigError(SemiflowError, ValueError):
    """Malformed experiment configuration (CLI exit code 2)."""
