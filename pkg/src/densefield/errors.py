"""Exception types shared across the package."""


class InfeasibleConfigError(ValueError):
    """A requested configuration violates a feasibility precondition.

    Raised e.g. when the sensor count is too small for the requested field
    distortion, no sub-interval count can meet the target, or a distortion
    budget is outside the achievable range.
    """


class ConditioningError(ArithmeticError):
    """A computation would rely on eigenvalues that exist only due to clamping."""


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its iteration budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
