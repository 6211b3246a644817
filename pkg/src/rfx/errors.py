"""Exception types shared across the package."""


class RfxError(Exception):
    """Base class for package errors."""


class DataError(RfxError):
    """Malformed input data or schema (CLI exit code 3)."""


class BudgetError(RfxError):
    """A proximity job was refused because its memory estimate exceeds the
    configured budget.  Carries the planner report that justified the refusal
    (CLI exit code 4)."""

    def __init__(self, message: str, plan: dict):
        super().__init__(message)
        self.plan = plan
