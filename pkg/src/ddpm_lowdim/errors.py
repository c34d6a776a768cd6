"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    pass


class StepIndexError(IndexError):
    """A step index t outside the valid range for the schedule."""


class DimensionMismatchError(ValueError):
    pass


class NumericOverflowError(ArithmeticError):
    """Raised when a reverse run or law propagation diverges."""


# Coordinates beyond this magnitude mean the coefficient design has diverged.
OVERFLOW_LIMIT = 1e15
