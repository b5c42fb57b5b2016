"""Exception hierarchy shared by all modules."""


class MimoCapError(Exception):
    """Base class for every error raised by this package."""


class DomainError(MimoCapError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ValidationError(MimoCapError, ValueError):
    """A correlation matrix or configuration failed validation."""


class DimensionMismatchError(ValidationError):
    pass


class NotHermitianError(ValidationError):
    pass


class NotPositiveDefiniteError(ValidationError):
    pass


class ParseError(MimoCapError, ValueError):
    """Malformed correlation-matrix file."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class NumericalDegeneracyError(MimoCapError, ArithmeticError):
    """A matrix needed by the analytic engines is singular or hopelessly
    ill-conditioned."""

    def __init__(self, message, condition=None):
        self.condition = condition
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)


class TruncationError(MimoCapError, ArithmeticError):
    """The characteristic function had not decayed at the truncation point."""


class BracketingError(MimoCapError, ArithmeticError):
    """The capacity window misses a non-negligible amount of probability."""


class OutageRangeError(MimoCapError, ValueError):
    """Requested outage probability lies outside the numerically resolved CDF."""


class ConfigurationMismatchError(MimoCapError, ValueError):
    """Analytic and empirical results refer to different channel setups."""
