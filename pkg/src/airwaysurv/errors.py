"""Exception types raised across the package."""


class AirwaySurvError(Exception):
    """Base class for all package errors."""


class FormatError(AirwaySurvError):
    """File is not a readable NIfTI-1 image."""


class UnsupportedDatatypeError(FormatError):
    """NIfTI datatype code outside the supported set."""


class GeometryError(AirwaySurvError):
    """Invalid geometry, or two grids that should match do not."""


class EmptyInputError(AirwaySurvError, ValueError):
    """An operation needs at least one foreground voxel (or sample)."""


class EmptyRoiError(EmptyInputError):
    pass


class TracheaNotFoundError(AirwaySurvError):
    """No foreground in the superior third of the mask."""


class ContainmentError(AirwaySurvError, ValueError):
    pass


class UndefinedCorrelationError(AirwaySurvError, ValueError):
    """Pearson correlation of a constant column."""


class MissingLabelsError(AirwaySurvError, ValueError):
    pass


class AlignmentError(AirwaySurvError, ValueError):
    """Two feature tables do not list the same cases in the same order."""


class SchemaError(AirwaySurvError, ValueError):
    """Feature columns do not match what a fitted object expects."""


class DegenerateTrainingError(AirwaySurvError, ValueError):
    """Training data contain a single class."""


class StratificationError(AirwaySurvError, ValueError):
    pass


class ConfigError(AirwaySurvError, ValueError):
    pass


class PhantomSpecError(AirwaySurvError, ValueError):
    pass
