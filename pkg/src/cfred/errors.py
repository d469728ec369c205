"""Exception hierarchy shared by the toolkit.

Two broad categories matter for the CLI exit codes: data/validation
problems (exit code 2) and numerical failures (exit code 3).
"""


class CfredError(Exception):
    """Base class for all toolkit errors."""


class DataError(CfredError):
    """Invalid, malformed, or inconsistent input data."""


class DegenerateInputError(DataError):
    """Too few samples to estimate the requested statistic."""


class PairingError(DataError):
    """Row-paired inputs whose pairing contract is violated."""


class DimensionMismatchError(DataError):
    """Operands whose shapes are incompatible."""


class FormatError(DataError):
    """Malformed embedding file or manifest."""

    def __init__(self, message, byte_offset=None):
        if byte_offset is not None:
            message = f"{message} (at byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class NumericalError(CfredError):
    """Numerical failure (indefinite matrix, undefined statistic, ...)."""


class NotPSDError(NumericalError):
    """Matrix is indefinite beyond the tolerated clamp threshold."""

    def __init__(self, message, worst_eigenvalue=None):
        super().__init__(message)
        self.worst_eigenvalue = worst_eigenvalue


class UndefinedCorrelationError(NumericalError):
    """Correlation requested on a zero-variance column."""
