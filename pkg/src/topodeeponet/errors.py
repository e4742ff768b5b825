"""Exception types shared across the package."""


class TopoDeepONetError(Exception):
    """Base class for all package errors."""


class RejectedInputError(TopoDeepONetError, ValueError):
    """An argument failed validation (NaN, bad shape, bad parameter)."""


class SpaceMismatchError(RejectedInputError):
    """Objects from two different measurement spaces were combined."""


class OutOfDomainError(RejectedInputError):
    """A point lies outside the box or domain an object is defined on."""


class CoverError(TopoDeepONetError):
    """A function lies outside every patch of a partition of unity."""


class OracleError(TopoDeepONetError):
    """A reference operator failed on a particular (c, y) pair."""

    def __init__(self, message, c=None, y=None):
        super().__init__(message)
        self.c = c
        self.y = y


class ConfigError(TopoDeepONetError, ValueError):
    """An experiment configuration failed schema validation."""
