"""Exception hierarchy for the Partition-DAG estimator.

None of these derive from ValueError, so raising them inside a pydantic
validator propagates the original exception instead of a ValidationError.
"""


class PartitionDAGError(Exception):
    """Base class for every error raised by the estimator."""


class InputError(PartitionDAGError):
    """Malformed input: shapes, non-finite values, conflicting options."""


class DegenerateDataError(PartitionDAGError):
    """The data cannot support a fit (e.g. a zero-variance column)."""

    def __init__(self, message: str, variable: str | None = None):
        super().__init__(message)
        self.variable = variable


class DomainError(PartitionDAGError):
    """A value outside the domain of the objective (B_ii <= 0, S_ii <= 0)."""


class PartitionError(PartitionDAGError):
    """Overlapping, missing or unknown variables in a partition."""

    def __init__(self, message: str, offenders: list[str] | None = None):
        super().__init__(message)
        self.offenders = offenders or []


class CycleError(PartitionDAGError):
    """An edge set or edge insertion that would contain a directed cycle."""

    def __init__(self, message: str, cycle: list[int] | None = None):
        super().__init__(message)
        self.cycle = cycle or []


class InvariantViolation(PartitionDAGError):
    """A matrix violates the structural rules of a Cholesky factor."""


class GridError(PartitionDAGError):
    """A penalty grid could not be built for the given covariance."""
