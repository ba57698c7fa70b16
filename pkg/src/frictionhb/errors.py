"""Exception types raised by the solver library."""


class FrictionHbError(Exception):
    """Base class for all library errors."""


class ValidationError(FrictionHbError, ValueError):
    """Invalid input: wrong shape, non-physical parameter, out-of-range value."""


class ContractViolation(FrictionHbError, ValueError):
    """A precondition of a low-level routine was violated by the caller."""


class ConvergenceError(FrictionHbError, RuntimeError):
    """An iterative procedure did not converge.

    Attributes
    ----------
    residual : float
        Last residual measure reached before giving up.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class StaticSolveError(ConvergenceError):
    """Newton failure during incremental static loading."""

    def __init__(self, message, step, residual=float("nan")):
        super().__init__(message, residual)
        self.step = step


class IntegrationError(ConvergenceError):
    """Step-local contact fixed point failure in time integration."""

    def __init__(self, message, time, residual=float("nan")):
        super().__init__(message, residual)
        self.time = time
