"""Exception hierarchy shared across the package."""


class PglcrError(Exception):
    """Base class for all package errors."""


class ConfigError(PglcrError, ValueError):
    """Invalid chain, prior or run configuration."""


class InvalidParameterError(PglcrError, ValueError):
    """A distribution parameter lies outside its support."""


class DegenerateWeightsError(PglcrError, ValueError):
    """Categorical weights are all zero or contain NaN."""


class DimensionError(PglcrError, ValueError):
    """Array shapes are inconsistent."""


class IngestionError(PglcrError, ValueError):
    """Malformed input file; carries the offending row/column when known."""

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class NumericalSingularityError(PglcrError, ArithmeticError):
    """A posterior precision matrix failed its Cholesky factorisation."""

    def __init__(self, message, class_index=None):
        if class_index is not None:
            message = f"{message} [class {class_index}]"
        super().__init__(message)
        self.class_index = class_index


class InsufficientSamplesError(PglcrError, ValueError):
    """Too few posterior samples for the requested summary."""


class TraceVersionError(PglcrError, ValueError):
    """A trace file was written by an incompatible format version."""
