"""Exception types shared across the package.

Module-specific errors subclass one of the bases here so the CLI can map
them to exit codes: anything derived from :class:`DataError` is a problem
with user-supplied inputs (exit code 2); everything else raised by the
package is an internal failure (exit code 3).
"""


class BagOfSoundsError(Exception):
    """Base class for every error raised by this package."""


class DataError(BagOfSoundsError):
    """Invalid input data: manifests, labels, audio files, shapes."""


class ConfigError(BagOfSoundsError):
    """Invalid configuration value (exit code 1 when raised from the CLI)."""


class ShapeMismatch(DataError):
    """Array dimensions do not line up with the fitted state."""


class UnknownLabel(DataError):
    """Label code not part of the active scheme."""

    def __init__(self, code, row=None):
        self.code = code
        self.row = row
        where = f" (row {row})" if row is not None else ""
        super().__init__(f"unknown label {code!r}{where}")
