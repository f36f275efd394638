"""Exception types raised across the package."""


class DiscatError(Exception):
    """Base class for all package errors."""


class InputError(DiscatError, ValueError):
    """Malformed user input (tables, CSV files, flags)."""


class OutOfRangeCategory(InputError):
    pass


class RaggedRow(InputError):
    pass


class MissingValue(InputError):
    pass


class EmptyTable(InputError):
    pass


class NegativeResidual(DiscatError, ValueError):
    pass


class AtKink(DiscatError, ArithmeticError):
    """A Pearson residual sits on the tuning constant, where w' is undefined."""


class ZeroModelProbability(DiscatError, ArithmeticError):
    pass


class InvalidParameter(DiscatError, ValueError):
    pass


class DegenerateProbability(DiscatError, ArithmeticError):
    """Some model cell probability fell to or below the underflow floor."""


class HessianUnavailable(DiscatError):
    pass


class ScoreMismatch(DiscatError, ValueError):
    pass


class CountExceedsTruncation(DiscatError, ValueError):
    pass


class DegenerateMargin(DiscatError, ValueError):
    """A variable has fewer than two observed categories."""


class InsufficientCells(DiscatError, ValueError):
    pass


class NonConvergence(DiscatError, RuntimeError):
    pass


class ZeroVariance(DiscatError, ArithmeticError):
    pass


class SingularM(DiscatError, ArithmeticError):
    pass


class SingularInformation(DiscatError, ArithmeticError):
    pass


class HeywoodCase(DiscatError, ArithmeticError):
    """A uniqueness reached its lower floor during factor fitting."""
