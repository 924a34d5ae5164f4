"""Exception types shared across the package."""


class StrainfieldError(Exception):
    """Base class for all package-specific errors."""


class DegenerateInputError(StrainfieldError, ValueError):
    """Input is structurally valid but carries no usable information
    (e.g. a constant input grid that cannot be standardized)."""


class DomainOverflowError(StrainfieldError, ValueError):
    """An input falls outside the compact approximation domain [-L, L]."""


class NumericalError(StrainfieldError, ArithmeticError):
    """A non-finite value appeared during a numerical computation."""

    def __init__(self, message: str, coordinate: int | None = None):
        super().__init__(message)
        self.coordinate = coordinate


class ConvergenceFailure(StrainfieldError, RuntimeError):
    """Sampling finished but failed its quality gates."""


class InitializationFailure(StrainfieldError, RuntimeError):
    """No finite starting point could be found for the sampler."""
