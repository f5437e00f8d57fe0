"""Exception and warning types shared across the package."""


class DemriError(Exception):
    """Base class for every error raised by demri_eval."""


class InvalidGeometryError(DemriError, ValueError):
    """Non-positive spacing, empty extents, or mismatched grids."""


class InvalidLabelError(DemriError, ValueError):
    """A label map holds a code outside {0, 1, 2, 3, 4}."""


class NiftiError(DemriError):
    """Base class for NIfTI-1 parsing failures."""


class NiftiFormatError(NiftiError, ValueError):
    """Header magic, size or dimension fields are not valid NIfTI-1."""


class UnsupportedDatatypeError(NiftiError, ValueError):
    """The header declares a datatype this reader does not handle."""


class CorruptFileError(NiftiError, ValueError):
    """Payload is truncated, oversized, or the gzip stream is damaged."""


class EmptyDatasetError(DemriError, ValueError):
    """A ground-truth directory contains no NIfTI files."""


class DegenerateForegroundError(DemriError, ValueError):
    """A foreground mask is empty or collapses to a single point."""


class InsufficientDataError(DemriError, ValueError):
    """Too few samples to fit a mixture model."""


class DegenerateFitError(DemriError, RuntimeError):
    """A mixture component collapsed during EM."""


class SchemaError(DemriError, ValueError):
    """A CSV or JSON document does not have the expected structure."""


class ClinicalTableError(DemriError, ValueError):
    """One or more rows of a clinical table failed validation.

    ``errors`` holds ``(row, column, message)`` tuples, row numbers counted
    from 1 for the first data row.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"row {r}, column {c!r}: {m}" for r, c, m in self.errors]
        super().__init__(f"{len(self.errors)} invalid cell(s):\n  " + "\n  ".join(lines))


class DegenerateTrainingError(DemriError, ValueError):
    """Training data contains a single class."""


class DemriWarning(UserWarning):
    """Base class for warnings emitted by demri_eval."""


class DegenerateSliceWarning(DemriWarning):
    """A slice had (near) zero standard deviation during normalization."""


class EmptyMaskWarning(DemriWarning):
    """A metric was asked to measure an empty region and used its sentinel."""


class ZeroInstanceWarning(DemriWarning):
    """A class has no instances, so its inverse-frequency weight is undefined."""


class ZeroVarianceWarning(DemriWarning):
    """A feature is constant over the training set."""
