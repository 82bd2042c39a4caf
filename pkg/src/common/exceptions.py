class ChronologyError(Exception):
    """Base class for every error raised by the dating toolkit."""

    def __init__(self, message=None, *, message_override=None):
        self.message = message_override if message_override is not None else (message or self.__class__.__name__)
        super().__init__(self.message)

    def __str__(self):
        return self.message


class ValidationError(ChronologyError, ValueError):
    """When a dataset or a value object breaks one of its invariants."""

    def __init__(self, problem=None, offending_rows=None, *, message_override=None):
        self.offending_rows = list(offending_rows or [])
        if message_override is None:
            if problem is None:
                raise ValueError("ValidationError must have a problem description or a message override.")
            if self.offending_rows:
                rows_str = ", ".join(str(row) for row in self.offending_rows)
                message_override = f"{problem} (rows: {rows_str})"
            else:
                message_override = problem
        super().__init__(message_override=message_override)


class FormatError(ChronologyError, ValueError):
    """When a CSV file cannot be parsed."""

    def __init__(self, problem=None, row=None, column=None, *, message_override=None):
        self.row = row
        self.column = column
        if message_override is None:
            where = []
            if row is not None:
                where.append(f"row {row}")
            if column is not None:
                where.append(f"column '{column}'")
            where_str = f" at {', '.join(where)}" if where else ""
            message_override = f"{problem or 'Malformed file'}{where_str}"
        super().__init__(message_override=message_override)


class DomainError(ChronologyError, ValueError):
    """When an operation is called outside its domain."""


class NoDatableExcess(DomainError):
    """When no slab keeps a positive excess 210Pb after supported subtraction."""

    def __init__(self, message="no datable excess 210Pb: every excess activity is <= 0", **kwargs):
        super().__init__(message, **kwargs)


class DatasetIOError(ChronologyError, OSError):
    """When a file cannot be read or written."""


class ConvergenceWarning(UserWarning):
    """Effective sample size of a chain fell below the configured floor."""
