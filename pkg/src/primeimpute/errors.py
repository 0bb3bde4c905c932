"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and belongs to one of
three families, which the command-line front end maps onto exit codes.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ESTIMATOR = 3
EXIT_IO = 4


class PrimeError(Exception):
    code = "error"
    exit_code = 1


class ValidationError(PrimeError, ValueError):
    """Bad input data, bad parameters or a bad configuration document."""

    code = "validation"
    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class CsvParseError(ValidationError):
    code = "csv_parse"

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class EmptyPatternError(ValidationError):
    """One or more rows have no observed covariate."""

    code = "empty_pattern"

    def __init__(self, rows):
        self.rows = list(rows)
        shown = ", ".join(str(r) for r in self.rows[:20])
        more = "" if len(self.rows) <= 20 else f" (+{len(self.rows) - 20} more)"
        super().__init__(f"rows with every covariate missing: {shown}{more}")


class EstimatorError(PrimeError, ArithmeticError):
    code = "estimator"
    exit_code = EXIT_ESTIMATOR


class SingularDesignError(EstimatorError):
    code = "singular_design"

    def __init__(self, message: str, condition: float | None = None):
        self.condition = condition
        super().__init__(message)


class ShootingConvergenceError(EstimatorError):
    code = "no_convergence"

    def __init__(self, message: str, beta=None, sweeps: int | None = None):
        self.beta = beta
        self.sweeps = sweeps
        super().__init__(message)


class UnimputableCellError(EstimatorError):
    code = "unimputable_cell"

    def __init__(self, row: int, column: int, reason: str):
        self.row = row
        self.column = column
        super().__init__(f"cannot impute cell ({row}, {column}): {reason}")


class InsufficientRowsError(EstimatorError):
    code = "insufficient_rows"

    def __init__(self, message: str, count: int):
        self.count = count
        super().__init__(message)


class RunIOError(PrimeError, OSError):
    code = "io"
    exit_code = EXIT_IO
