"""
Exception hierarchy for the alignment toolkit
"""
from typing import Optional


class CoregError(Exception):
    """Base class for every error raised by this package"""


class SingularTransform(CoregError):
    """Affine geotransform has a non-invertible linear part"""


class NoOverlap(CoregError):
    """Two footprints (or a footprint and an AOI) do not intersect"""


class CrsMismatch(CoregError):
    """Inputs are expressed in different coordinate reference systems"""


class InvalidRaster(CoregError):
    """Raster violates a structural invariant (GSD, dtype, shape)"""


class UpsampleRequested(CoregError):
    """Caller asked for a grid finer than the source band"""


class UnsupportedFormat(CoregError):
    """File extension does not map to a known reader"""


class ConfigError(CoregError):
    """Invalid configuration value"""


class ParseError(CoregError):
    """Input document could not be parsed

    Carries the 1-based line number (text formats) or the 0-based
    record index (JSON arrays) where parsing stopped.
    """

    def __init__(self, message: str, line: Optional[int] = None, index: Optional[int] = None):
        self.line = line
        self.index = index
        if line is not None:
            message = f"line {line}: {message}"
        elif index is not None:
            message = f"record {index}: {message}"
        super().__init__(message)


class OutOfGrid(CoregError):
    """Coordinate lies outside its declared grid"""


class InsufficientPoints(CoregError):
    """Fewer tiepoints than the model has parameters per axis"""


class RankDeficient(CoregError):
    """Design matrix is too ill-conditioned to solve"""


class EmptySet(CoregError):
    """Operation needs at least one tiepoint"""


class NoConsensus(CoregError):
    """RANSAC could not find an inlier set large enough to trust"""


class FailedAlignment(CoregError):
    """Pairwise alignment could not produce a model"""


class NoTile(CoregError):
    """No tile footprint in the index intersects the AOI"""
