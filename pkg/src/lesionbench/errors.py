"""Exception types raised across the package.

Every error carries its class name as the diagnostic label the CLI prints,
so names mirror the failure they describe.
"""


class LesionBenchError(Exception):
    """Base class for all package errors."""


# volume I/O
class UnreadableFile(LesionBenchError, OSError):
    pass


class UnsupportedFormat(LesionBenchError, ValueError):
    pass


class NonBinaryMask(LesionBenchError, ValueError):
    pass


class OutOfRangeProbability(LesionBenchError, ValueError):
    pass


class MissingSpacing(LesionBenchError, ValueError):
    pass


class UnwritablePath(LesionBenchError, OSError):
    pass


# grid compatibility
class GridMismatch(LesionBenchError, ValueError):
    pass


class DimsMismatch(GridMismatch):
    pass


class SpacingMismatch(GridMismatch):
    pass


# pipeline
class InvalidThreshold(LesionBenchError, ValueError):
    pass


class BottomExceedsGrid(LesionBenchError, ValueError):
    pass


# cohort
class ManifestError(LesionBenchError, ValueError):
    pass


class DuplicateStudyId(ManifestError):
    pass


class UnknownDisease(ManifestError):
    pass


class MalformedRow(ManifestError):
    pass


class InvalidK(LesionBenchError, ValueError):
    pass


class UnknownStudyInMetrics(LesionBenchError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class MissingMetric(LesionBenchError, ValueError):
    pass
