"""Exception hierarchy shared by the solver, spectrum and storage modules."""


class BabenkoError(Exception):
    """Base class for all package errors."""


class NumericalFailure(BabenkoError):
    """A numerical procedure did not deliver a trustworthy result."""


class NonConvergence(NumericalFailure):
    pass


class SingularJacobian(NumericalFailure):
    """The inner Krylov solve stagnated; usually a fold point is close."""


class StepFailure(NumericalFailure):
    def __init__(self, message, last_point=None):
        super().__init__(message)
        self.last_point = last_point


class FoldPoint(NumericalFailure):
    pass


class SolvabilityViolation(NumericalFailure):
    pass


class IterationFailure(NumericalFailure):
    pass


class ArnoldiBreakdown(NumericalFailure):
    pass


class InnerSolveFailure(NumericalFailure):
    pass


class DegenerateExtremum(NumericalFailure):
    pass


class BoundaryPoint(BabenkoError, IndexError):
    pass


class StoreError(BabenkoError):
    pass


class ChecksumMismatch(StoreError):
    pass


class VersionUnsupported(StoreError):
    pass


class InvariantViolation(StoreError):
    pass


class ParseError(StoreError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class MonotonicityViolation(StoreError):
    pass
