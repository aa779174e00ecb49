"""Exception types shared across the toolkit."""


class VesselacsError(Exception):
    """Base class for all toolkit errors."""


class UsageError(VesselacsError):
    """Bad arguments or configuration (CLI exit code 1)."""


class DataError(VesselacsError):
    """Unreadable, inconsistent, or degenerate input data (CLI exit code 2)."""


class DimensionMismatchError(DataError):
    """Rasters that must share dimensions do not."""
