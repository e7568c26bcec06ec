"""
rdbn Exception Classes

All custom exceptions inherit from RDBNError for easy catching. The CLI maps
input-side errors to exit code 2 and numerical/search failures to exit code 3
through the ``exit_code`` class attribute.
"""

from typing import Optional


class RDBNError(Exception):
    """Base exception for all rdbn errors."""

    exit_code = 3

    def __init__(self, message: str = "An rdbn error occurred"):
        self.message = message
        super().__init__(self.message)


class ValidationError(RDBNError, ValueError):
    """Raised when an input value or configuration flag is out of range."""

    exit_code = 2

    def __init__(self, message: str = "Invalid value"):
        super().__init__(message)


class SchemaError(RDBNError):
    """Raised when a CSV file does not match the expected schema."""

    exit_code = 2

    def __init__(
        self,
        message: str = "Schema violation",
        line: Optional[int] = None,
        column: Optional[str] = None,
    ):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column '{column}'")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class PipelineError(RDBNError):
    """Raised when ingestion cannot produce a dataset (e.g. empty merge)."""

    exit_code = 2

    def __init__(self, message: str = "Pipeline failed"):
        super().__init__(message)


class StructuralError(RDBNError):
    """Raised when a graph is not a valid DAG."""

    def __init__(self, message: str = "Invalid DAG structure"):
        super().__init__(message)


class ConstraintError(RDBNError):
    """Raised when black/whitelists are inconsistent."""

    exit_code = 2

    def __init__(self, message: str = "Inconsistent edge constraints"):
        super().__init__(message)


class FitError(RDBNError):
    """Raised when a node's regression cannot be fitted."""

    def __init__(self, message: str = "Node fit failed", node: Optional[str] = None):
        self.node = node
        super().__init__(message)


class NumericalError(RDBNError):
    """Raised on degenerate variances, singular systems or non-finite values."""

    def __init__(self, message: str = "Numerical failure"):
        super().__init__(message)


class InsufficientDataError(RDBNError):
    """Raised when there are too few rows to learn a structure."""

    def __init__(self, message: str = "Not enough data"):
        super().__init__(message)


class ImputationError(RDBNError):
    """Raised when a missing cell cannot be imputed."""

    def __init__(self, message: str = "Imputation failed"):
        super().__init__(message)


class DeserializationError(RDBNError):
    """Raised when deserialization of stored data fails."""

    exit_code = 2

    def __init__(self, message: str = "Failed to deserialize data"):
        super().__init__(message)
