"""Exception types raised across the package."""


class SparseDetError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SparseDetError, ValueError):
    """An argument violates a documented precondition."""


class UndefinedValueError(SparseDetError, ValueError):
    """The requested quantity is undefined for the input (e.g. zero matrix)."""


class ConvergenceError(SparseDetError, RuntimeError):
    """An iterative method ran out of iterations.

    The last iterate is kept on ``last_value``.
    """

    def __init__(self, message, last_value=None):
        super().__init__(message)
        self.last_value = last_value


class BudgetExceededError(SparseDetError, RuntimeError):
    """An exact enumeration was requested beyond its configured cap."""
