"""Exception types shared across the package."""


class EyeMetricsError(Exception):
    """Base class for all errors raised by this package."""


class CodecError(EyeMetricsError):
    """Malformed or out-of-contract mask file content."""


class EmptyEyeError(EyeMetricsError):
    """A mask or region contains no iris/pupil pixels to work with."""


class DegenerateFitError(EyeMetricsError):
    """Circle fit is underdetermined (too few or collinear points)."""


class NoCircleError(EyeMetricsError):
    """Accumulator peak is too weak to accept as a circle."""


class DimensionMismatchError(EyeMetricsError):
    """Two rasters that must share dimensions do not."""


class AnnotationError(EyeMetricsError):
    """Malformed polygon annotation content."""


class ManifestError(EyeMetricsError):
    """Missing or invalid session manifest / metadata."""


class ExtrapolationError(EyeMetricsError):
    """A resampling grid reaches outside the source time span."""
