"""Exception types raised across the package."""


class CrcopError(Exception):
    """Base class for package errors."""


class DomainError(CrcopError, ValueError):
    """An argument lies outside the domain of the function."""


class ParameterError(CrcopError, ValueError):
    """A model parameter is invalid for the chosen family."""


class ConvergenceError(CrcopError, RuntimeError):
    """An iterative routine failed to converge."""


class NonFiniteError(CrcopError, FloatingPointError):
    """A likelihood or density evaluated to a non-finite value."""


class DataFormatError(CrcopError, ValueError):
    """Input data could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
