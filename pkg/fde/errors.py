"""Exception hierarchy. exit_code feeds the CLI, http_status feeds the service."""


class FDEError(Exception):
    exit_code = 1
    http_status = 500

    def __init__(self, message: str = "", **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": self.message, **self.context}


class ValidationFailure(FDEError):
    """Inputs violate a stated precondition."""
    exit_code = 2
    http_status = 400


class NumericalFailure(FDEError):
    """A computation could not reach its tolerance."""
    exit_code = 3
    http_status = 500


class InvalidHypotheses(ValidationFailure):
    pass


class InvalidSpec(ValidationFailure):
    pass


class ExcludedAngle(ValidationFailure):
    pass


class OutOfRange(ValidationFailure):
    pass


class UnknownClass(ValidationFailure):
    pass


class DegenerateCoefficients(ValidationFailure):
    pass


class InvalidWeight(ValidationFailure):
    pass


class InsufficientZeros(ValidationFailure):
    pass


class WindowViolation(ValidationFailure):
    pass


class IncompatibleParams(ValidationFailure):
    pass


class ParseError(ValidationFailure):
    pass


class RegionViolation(ValidationFailure):
    pass


class BadContour(ValidationFailure):
    pass


class KernelInvalid(ValidationFailure):
    pass


class PoleProximity(NumericalFailure):
    pass


class ZeroBase(NumericalFailure):
    pass


class NonConvergence(NumericalFailure):
    pass


class TruncationTooSmall(NumericalFailure):
    pass


class SummabilityFailure(NumericalFailure):
    pass


class DecayViolation(NumericalFailure):
    pass


class BracketFailure(NumericalFailure):
    pass


class DenominatorZero(NumericalFailure):
    pass


class BudgetExceeded(NumericalFailure):
    pass
