"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: DataError -> 1, ConfigError -> 2,
anything else (including InternalError / AssertionError) -> 3.
"""


class DensTreeError(Exception):
    """Base class for all package errors."""


class DataError(DensTreeError):
    """Bad input data: schema violations, malformed files, degenerate columns."""


class ConfigError(DensTreeError):
    """Invalid configuration: illegal flag combinations, bad parameter values."""


class DegenerateSplitError(DataError):
    """A holdout split would leave the train or holdout side empty."""


class ConstantColumnError(DataError):
    """A continuous column has no spread and cannot be rescaled."""

    def __init__(self, name):
        super().__init__(f"continuous column {name!r} is constant; cannot scale to [0, 1]")
        self.name = name


class ModelFormatError(DataError):
    """A serialized model could not be decoded."""

    def __init__(self, message, location=None):
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)
        self.location = location


class InternalError(DensTreeError):
    """An internal invariant was violated; indicates a bug, not bad input."""
