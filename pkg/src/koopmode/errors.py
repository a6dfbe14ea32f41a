"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific type that applies: bad user-supplied settings are
ConfigError, data that cannot be decoded is DataFormatError, and
conditions detected during numerical work (rank collapse, defective
eigenproblems, divergent solves) are NumericalError.
"""


class KoopmodeError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(KoopmodeError):
    """Invalid configuration value, flag, or combination of settings."""


class DataFormatError(KoopmodeError):
    """Malformed input file: bad magic, header, payload size, or values."""


class NumericalError(KoopmodeError):
    """A numerical precondition failed or a solver did not converge."""
