"""Shared exception types."""


class NpcharmError(Exception):
    """Base class for all toolkit errors."""


class InvalidPoint(NpcharmError):
    """Point/space mismatch or a point violating its representation invariants."""


class DomainError(NpcharmError):
    """Argument outside the documented domain of an operation."""


class UnsupportedSpace(NpcharmError):
    """Operation not defined for the given space."""


class FitError(NpcharmError):
    """Decay fit failed; carries the raw (t, displacement) series."""

    def __init__(self, message, series=None):
        super().__init__(message)
        self.series = series


class ConvergenceError(NpcharmError):
    """Iteration failed to converge; carries diagnostic history."""

    def __init__(self, message, last=None, history=None):
        super().__init__(message)
        self.last = last
        self.history = history


class UsageError(NpcharmError):
    """Malformed CLI flags or config file."""


class IoError(NpcharmError):
    """Filesystem failure; carries the offending path."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
