"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid model or integrator parameters."""


class DomainError(ValueError):
    """Argument outside the domain of a function."""


class UsageError(ValueError):
    """A check invoked outside the regime it applies to."""
