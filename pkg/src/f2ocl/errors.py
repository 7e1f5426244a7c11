"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class F2OCLError(Exception):
    exit_code = 1


class ConfigurationError(F2OCLError, ValueError):
    """Invalid configuration values (dimensions, rates, temperature, K)."""

    exit_code = 1


class InputError(F2OCLError, ValueError):
    """Arguments with the wrong shape or degenerate values."""

    exit_code = 1


class StateError(F2OCLError, RuntimeError):
    """Operation not valid for the current state, e.g. querying an empty pool."""

    exit_code = 1


class ParseError(F2OCLError, ValueError):
    """Malformed stream, config or state file."""

    exit_code = 2


class NumericError(F2OCLError, ArithmeticError):
    """Non-finite loss or gradient."""

    exit_code = 3
