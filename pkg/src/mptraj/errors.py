"""Exception hierarchy shared by the library and the CLI.

Each error category carries the process exit code the CLI maps it to.
"""


class MptrajError(Exception):
    """Base class for all library errors."""

    exit_code = 1
    category = "error"


class ValidationError(MptrajError):
    """Invalid argument, configuration, or domain violation."""

    exit_code = 2
    category = "validation"


class IoError(MptrajError):
    """File missing, unreadable, or unwritable."""

    exit_code = 3
    category = "io"


class NumericalError(MptrajError):
    """Overflow, divergence, singular factorization, or failed self-check."""

    exit_code = 4
    category = "numerical"


class DimensionError(MptrajError):
    """Shape or dimension mismatch between inputs."""

    exit_code = 5
    category = "dimension"
