"""Exception hierarchy shared by every module of the package."""


class DHTError(Exception):
    """Base class for all package errors."""


class ValidationError(DHTError, ValueError):
    """An input violates a documented precondition."""


class SupportError(ValidationError):
    """A distribution lacks the support an operation requires."""


class RateError(ValidationError):
    """A rate lies below the validity threshold of a bound."""


class GuardError(ValidationError):
    """A simulation request exceeds the exhaustive-enumeration guard."""


class NotProductError(ValidationError):
    """A hypothesis pair does not factor into the requested components."""


class ConvergenceError(DHTError):
    """An iterative solver exhausted its iteration budget."""


class InfeasibleFamilyError(ConvergenceError):
    """Iterative scaling stalled: the linear family is infeasible or degenerate."""


class QuantizationConditionError(ValidationError):
    """Two rows of the reference-normalized log-likelihood matrix coincide."""

    def __init__(self, message: str, witness: tuple[int, int]):
        super().__init__(message)
        self.witness = witness
