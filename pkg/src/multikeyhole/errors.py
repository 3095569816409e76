class DomainError(ValueError):
    """A numeric argument lies outside the domain of the operation."""


class NotPSDError(DomainError):
    """A matrix that must be positive semi-definite is not."""


class NegativeCapacityWarning(RuntimeWarning):
    """A Gaussian closed form produced a negative rate and was floored at 0."""


class DiagnosticWarning(RuntimeWarning):
    """A result is usable but falls outside the regime it was derived for."""
