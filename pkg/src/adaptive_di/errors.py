"""Exception types shared across the package."""


class AdiError(Exception):
    """Base class for all package errors."""


class ParameterError(AdiError, ValueError):
    """A hyperparameter or configuration value is outside its valid range."""


class DomainError(AdiError, ValueError):
    """Input data violates an operation's precondition (empty, non-finite, ...)."""


class StateError(AdiError, RuntimeError):
    """An operation was called on a state that cannot support it."""


class NumericalError(AdiError, ArithmeticError):
    """A covariance block is singular or not positive definite."""

    def __init__(self, message, *, condition=None, t=None):
        if t is not None:
            message = f"{message} (t={t})"
        if condition is not None:
            message = f"{message} [cond={condition:.3g}]"
        super().__init__(message)
        self.condition = condition
        self.t = t


class ParseError(DomainError):
    """Malformed annotation input; carries the 1-based line number."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno
