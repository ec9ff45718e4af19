"""Failure categories shared across modules (CLI maps them to exit codes)."""


class DataError(Exception):
    """Missing or malformed inputs (exit code 3)."""


class NumericAbort(Exception):
    """Non-finite loss or state during training (exit code 4)."""
