"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input parameters or a violated precondition."""


class ConsistencyError(RuntimeError):
    """Two independent computations disagree, or a proven property fails."""


class IntegrationError(RuntimeError):
    """Adaptive integration could not proceed (step size underflow)."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state
