"""Exception hierarchy shared by every stage.

The CLI maps each category to its own exit code, so library code should raise
the most specific class that applies.
"""


class HmmLstmError(Exception):
    """Base class for all package errors."""


class ConfigError(HmmLstmError, ValueError):
    """Invalid run configuration or argument combination."""


class DataError(HmmLstmError, ValueError):
    """Input data is missing, malformed, misaligned or too short."""


class DegenerateError(HmmLstmError, ArithmeticError):
    """A numerical procedure cannot proceed (singular system, zero variance...)."""
