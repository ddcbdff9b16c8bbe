"""Exception hierarchy shared by every module."""


class OicapError(Exception):
    """Base class for all library errors."""


class DomainError(OicapError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConstraintError(OicapError, ValueError):
    """A channel input violates nonnegativity or the intensity budget."""


class BracketError(OicapError, ValueError):
    """A root-finding bracket does not straddle the target."""


class UsageError(OicapError, TypeError):
    """Arguments are individually valid but inconsistent with each other."""


class RegimeError(OicapError, ValueError):
    """A tail bound is applied outside the regime where it holds."""


class AccuracyError(OicapError, ArithmeticError):
    """A numerical routine could not reach its accuracy target.

    The best available estimate is kept on ``best_estimate``.
    """

    def __init__(self, message, best_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate


class ConvergenceError(OicapError, ArithmeticError):
    """An iterative solver hit its iteration cap; ``last`` holds the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class ValidityViolated(OicapError):
    """A bound's derivation does not apply at these parameters.

    The fully evaluated report (with the failing flag set to False) is
    attached as ``report`` so sweeps can still record it.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
