"""Exception hierarchy shared by every module."""


class CGMMError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class DataError(CGMMError):
    """Malformed dataset, model or kernel file, or inconsistent input data."""

    exit_code = 2


class NumericalError(CGMMError):
    """Degenerate parameters (e.g. a vertex with zero likelihood)."""

    exit_code = 3


class ConfigError(CGMMError):
    """Unknown or invalid run configuration."""

    exit_code = 1
