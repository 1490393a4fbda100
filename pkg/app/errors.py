"""
Exception hierarchy shared by every planner module.
"""


class PlannerError(Exception):
    """Base class for all planner errors."""


class PreconditionError(PlannerError, ValueError):
    """An argument violates an operation's precondition (index range, lengths, empty input)."""


class DomainError(PlannerError, ValueError):
    """A numeric argument lies outside the mathematical domain of a formula."""


class BudgetExhaustedError(PlannerError):
    """A charge would overdraw a client, or no client has budget left."""


class PhaseError(PlannerError):
    """An allocator operation was called in the wrong phase."""


class InfeasibleLPError(PlannerError):
    """The budget cap of the initial-stage LP is below the cheapest action."""


class GprNumericalError(PlannerError):
    """The GPR covariance could not be factorized, even after adding jitter."""


class ConfigError(PlannerError, ValueError):
    """Invalid run configuration."""


class DatasetParseError(PlannerError, ValueError):
    """Malformed lines in a ratings file."""

    def __init__(self, message: str, line_numbers=None):
        super().__init__(message)
        self.line_numbers = list(line_numbers or [])
