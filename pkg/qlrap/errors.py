"""
qlrap/errors.py

Exception hierarchy for the qlrap package.

Every failure raised by the library derives from QlrapError, so the CLI
can catch one type at the command boundary and map it to an exit code.
Validation failures carry the measured violation magnitude.
"""

from __future__ import annotations


class QlrapError(Exception):
    """Base class for every qlrap failure."""

    # exit status used by the CLI when this error escapes a command
    exit_code: int = 1


#####################################
# Validation Errors
#####################################


class ValidationError(QlrapError):
    """An input violated a numerical invariant by `violation`."""

    def __init__(self, message: str, violation: float = 0.0) -> None:
        super().__init__(message)
        self.violation = float(violation)


class NotHermitian(ValidationError):
    pass


class NotUnitTrace(ValidationError):
    pass


class NotPSD(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


#####################################
# Shape and Argument Errors
#####################################


class DimMismatch(QlrapError):
    pass


class LengthMismatch(QlrapError):
    pass


class SumMismatch(QlrapError):
    pass


class RankOutOfRange(QlrapError):
    pass


class ZeroTrace(QlrapError):
    pass


class ZeroVector(QlrapError):
    pass


class ParseError(QlrapError):
    pass


#####################################
# Budget and Convergence Errors
#####################################


class NoConvergence(QlrapError):
    exit_code = 2


class BudgetExceeded(QlrapError):
    exit_code = 2


# Warning tag attached to solutions, not raised.
DEGENERATE_BOUNDARY = "DegenerateBoundary"

# Outcome tag reported by the misordering demo, not raised.
NO_MISORDERED_MEMBER = "NoMisorderedMember"
