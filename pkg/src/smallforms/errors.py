"""Exception types shared across the package.

The CLI maps these onto exit codes: precondition-style failures exit with 2,
resource-budget failures with 3.
"""


class SmallFormsError(Exception):
    """Base class for all package errors."""


class PreconditionError(SmallFormsError, ValueError):
    """An argument or configuration violates a documented precondition."""


class BudgetExceededError(SmallFormsError):
    """An enumeration or grid request is outside the supported desk-scale budget."""


class SingularMatrixError(PreconditionError):
    """A square matrix required to be invertible is singular or near-singular."""


class OutOfCubeError(PreconditionError):
    """A constructed column left the ambient cube."""


class HorizonTooSmallError(PreconditionError):
    """A summation horizon is too short for the requested construction."""


class TheoremViolationError(SmallFormsError):
    """A search guaranteed to succeed by theory came back empty.

    This must never fire on valid inputs; if it does, it indicates a bug and is
    treated as a test failure, not a recoverable condition.
    """
