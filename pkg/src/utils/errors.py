from typing import List, Optional, Sequence


class AimdModelError(Exception):
    """Base class for every error raised by the fluid model library."""

    kind = "model_error"
    exit_code = 1


class InvalidParametersError(AimdModelError, ValueError):
    """Parameters outside the admissible region."""

    kind = "invalid_parameters"
    exit_code = 2


class RootFindingError(AimdModelError, RuntimeError):
    """A bracketed solve could not be set up or did not converge."""

    kind = "root_finding"


class ConvergenceError(AimdModelError, RuntimeError):
    """An iteration cap was hit before the sequence settled."""

    kind = "convergence"

    def __init__(self, message: str, tail: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.tail: List[float] = list(tail or [])


class NoCriticalCycleError(AimdModelError, ValueError):
    kind = "no_critical_cycle"


class HypothesisError(AimdModelError, ValueError):
    """Closed forms requested outside the regime they were derived for."""

    kind = "hypothesis"


class InfeasibleConstraintError(AimdModelError):
    kind = "infeasible"
    exit_code = 3


class InvariantViolation(AimdModelError, AssertionError):
    kind = "invariant"
