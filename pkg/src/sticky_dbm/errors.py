"""Exception hierarchy shared by all modules."""


class StickyDbmError(Exception):
    """Base class for all library errors."""


class ConfigurationError(StickyDbmError):
    """Invalid user-supplied parameters (grid misalignment, bad horizons, ...)."""

    def __init__(self, message, code="E_CONFIG"):
        super().__init__(message)
        self.code = code


class NumericalFailure(StickyDbmError):
    """A numerical routine produced a non-finite or non-convergent result."""


class ContractViolation(StickyDbmError):
    """An operation was called with inputs that break a documented precondition."""


class InternalConsistencyError(StickyDbmError):
    """A structural invariant that should hold by construction was violated."""
