"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented precondition or invariant."""


class SimulationLimitError(ValidationError):
    """A requested state or coefficient table exceeds the configured size limit."""


class NumericalError(RuntimeError):
    """An iterative numerical procedure failed to converge or verify."""


class ConditioningError(NumericalError):
    """A least-squares system is too ill-conditioned to solve reliably."""
