"""Exception types raised across the package."""


class ShapeError(ValueError):
    """An array or vector does not have the dimensions an operation expects."""


class ContractError(RuntimeError):
    """A call sequence violates an API contract (stale cache, step after done)."""


class NumericError(FloatingPointError):
    """A non-finite value appeared where a finite one is required."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class DegenerateInputError(ValueError):
    """The input admits no well-defined answer (zero variance, zero residual)."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    The last iterate is kept on ``last_iterate``.
    """

    def __init__(self, message, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate
