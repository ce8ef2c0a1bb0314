"""Exception hierarchy shared by every module of the package."""


class GsmaError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(GsmaError, ValueError):
    pass


class SingularMatrix(GsmaError):
    """A factorization met a pivot below the drop tolerance."""

    def __init__(self, msg, pivot_index=None, row=None, col=None):
        super().__init__(msg)
        self.pivot_index = pivot_index
        # original row / column of the failed pivot, when known
        self.row = row
        self.col = col


class NoConvergence(GsmaError):
    pass


class ParseError(GsmaError, ValueError):
    def __init__(self, msg, line=None):
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)
        self.line = line


class UnsupportedFormat(GsmaError, ValueError):
    pass


class InvalidPencil(GsmaError, ValueError):
    pass


class DegenerateSubspace(GsmaError):
    pass


class NotSolvable(GsmaError):
    pass


class ShiftSingular(GsmaError):
    pass


class InterconnectionSingular(GsmaError):
    pass


class RegularizationFailed(GsmaError):
    pass


class SingularCapacitance(GsmaError):
    pass


class InsufficientData(GsmaError, ValueError):
    pass


class GenerationFailed(GsmaError):
    pass


class SolverError(GsmaError):
    """Iteration failure; carries the partial convergence report."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class MaxIterations(SolverError):
    pass


class Diverged(SolverError):
    pass


class IterateSingular(SolverError):
    pass
