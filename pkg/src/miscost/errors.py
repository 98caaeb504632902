"""Exception types shared across the engines."""


class MiscostError(Exception):
    """Base class for all package errors."""


class SizeTooLarge(MiscostError):
    """Brute-force oracle asked to enumerate a graph beyond its size limit."""


class BudgetExceeded(MiscostError):
    """A sampler or search run passed its call-count guard."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class PrecisionInsufficient(MiscostError):
    """Doubled-precision re-run disagreed with the working-precision value."""


class DomainError(MiscostError, ValueError):
    """Argument outside the mathematical domain of the function."""


class InsufficientData(MiscostError):
    """A report was asked for with fewer grid points than it needs."""
