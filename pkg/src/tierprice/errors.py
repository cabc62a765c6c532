"""Exception hierarchy shared across the package."""


class TierPriceError(Exception):
    """Base class for all package errors."""


class ParseError(TierPriceError, ValueError):
    """A CSV row could not be parsed.

    Carries the file, 1-based line number and offending field so the CLI
    can point at the exact cell.
    """

    def __init__(self, path, line, field, message):
        self.path = str(path)
        self.line = line
        self.field = field
        super().__init__(f"{self.path}:{line}: field {field!r}: {message}")


class InsufficientDataError(TierPriceError, ValueError):
    pass


class DegenerateSeriesError(TierPriceError, ValueError):
    """Zero variance, zero denominators and similar degenerate inputs."""


class SingularMatrixError(TierPriceError, ValueError):
    pass


class ConvergenceError(TierPriceError, RuntimeError):
    """Optimizer failed; ``best_params`` holds the best point found."""

    def __init__(self, message, best_params=None, best_value=None):
        super().__init__(message)
        self.best_params = best_params
        self.best_value = best_value


class ModelSelectionError(TierPriceError, RuntimeError):
    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = dict(failures or {})


class DomainError(TierPriceError, ValueError):
    """Evaluation requested outside the fitted domain, or parameter out of range."""
