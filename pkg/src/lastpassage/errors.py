"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UsageError(ValueError):
    """An operation was called in a way its contract does not allow."""


class ConfigurationError(ValueError):
    """A sampler, scheme or run configuration is inconsistent."""


class EvaluationError(ArithmeticError):
    """A user-supplied function returned non-finite values where it was sampled."""
