"""Exception hierarchy. Each family maps to one CLI exit code."""


class SnnVadError(Exception):
    exit_code = 1


class ValidationError(SnnVadError, ValueError):
    """Bad configuration, bad arguments, or a violated precondition."""

    exit_code = 1


class DataError(SnnVadError, ValueError):
    """Input data that cannot be processed (malformed files, wrong rates, single-class labels)."""

    exit_code = 2


class AudioFormatError(DataError):
    pass


class NumericError(SnnVadError, ArithmeticError):
    """Non-finite values during training or simulation."""

    exit_code = 3
