"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, DataError and
subclasses exit 2, NumericError exits 3.
"""
from __future__ import annotations


class TspFcnError(Exception):
    """Base class for all package errors."""


class DataError(TspFcnError):
    """Invalid input data, file or configuration."""


class InvalidInstanceError(DataError):
    pass


class InvalidTourError(DataError):
    pass


class ConfigError(DataError):
    pass


class RasterError(DataError):
    """Out-of-bounds drawing or inconsistent image data."""


class MalformedFileError(DataError):
    pass


class ShapeError(DataError):
    pass


class SizeLimitError(DataError):
    """Instance is larger than a solver's size guard allows."""


class CheckpointError(DataError):
    """Bad magic, wrong version or truncated checkpoint file."""


class NumericError(TspFcnError):
    """A NaN or Inf tripped a numeric guard."""
