"""Exception hierarchy shared across the pipeline.

The CLI maps these to exit codes: DataError -> 2, NumericalError -> 3.
"""


class ErpError(Exception):
    """Base class for expected pipeline failures."""


class DataError(ErpError):
    """Invalid, inconsistent, or degenerate input data."""


class NumericalError(ErpError):
    """Numerical failure: singular system, divergence, or overflow."""
