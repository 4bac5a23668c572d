"""Exception types shared across the package."""


class QinterfError(Exception):
    """Base class for package errors."""


class ConfigError(QinterfError, ValueError):
    """Invalid experiment configuration; ``key`` names the offending field."""

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class NumericalError(QinterfError, ArithmeticError):
    """A computation has no well-defined result (degenerate field, failed quadrature)."""


class DegenerateFieldError(NumericalError):
    """The field cannot be normalized, e.g. an amplitude that cancels everywhere."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""
