"""Exception types shared across the package."""


class DtcbfError(Exception):
    """Base class for all package errors."""


class ExprSyntaxError(DtcbfError):
    """Raised when an expression string does not conform to the grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UndeclaredVariableError(DtcbfError):
    """Raised when an expression references a variable that was not declared."""

    def __init__(self, name: str, position: int | None = None):
        where = f" (at position {position})" if position is not None else ""
        super().__init__(f"undeclared variable '{name}'{where}")
        self.name = name
        self.position = position


class DomainError(DtcbfError):
    """A partial operation was evaluated outside its domain.

    Raised eagerly (division by an interval containing zero, log of a
    non-positive argument, sqrt of a negative argument) instead of letting
    NaNs propagate silently.
    """


class DimensionMismatchError(DtcbfError):
    """Vector/box dimensions do not match the declared variable counts."""


class ValidationError(DtcbfError):
    """A problem definition violates one of its declared invariants."""


class IterationLimitError(DtcbfError):
    """An iterative routine hit its iteration cap.

    Carries the best iterate found so callers can degrade conservatively.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class PolicyDomainError(DtcbfError):
    """A piecewise policy lookup fell outside every stored box."""
