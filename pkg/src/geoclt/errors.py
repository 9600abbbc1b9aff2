"""Exception hierarchy shared by all geoclt modules."""


class GeoCLTError(Exception):
    """Base class for all errors raised by geoclt."""


class InputError(GeoCLTError, ValueError):
    """Malformed argument (wrong shape, non-unit direction, ...)."""


class DomainError(GeoCLTError, ValueError):
    """Argument is well-formed but outside the domain of the operation."""


class ModelError(GeoCLTError):
    """A geometric model violates its defining assumptions (e.g. not C^2_+)."""


class NumericalError(GeoCLTError, ArithmeticError):
    """A numerical procedure failed to converge.

    ``estimates`` carries the last available approximations, if any.
    """

    def __init__(self, message, estimates=None):
        super().__init__(message)
        self.estimates = estimates


class ConfigError(GeoCLTError, ValueError):
    """Invalid experiment or diagnostic configuration."""


class DataError(GeoCLTError, ValueError):
    """Invalid data passed to a statistical fit."""
