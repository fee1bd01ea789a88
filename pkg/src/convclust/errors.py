"""Exception hierarchy shared across the package.

Two broad families matter downstream: :class:`DataError` covers malformed
files and inconsistent inputs (CLI exit code 2), :class:`NumericalError`
covers inference blow-ups (CLI exit code 3). Usage errors stay with
argparse (exit code 1).
"""


class DataError(ValueError):
    """Malformed file, unsupported format, or inconsistent input data."""


class NpyFormatError(DataError):
    """NPY file violates the supported subset (magic, version, dtype, order)."""


class MetadataError(DataError):
    """Dataset metadata CSV is missing, empty, or inconsistent."""


class NumericalError(RuntimeError):
    """Numerical failure during inference (non-finite objective)."""
