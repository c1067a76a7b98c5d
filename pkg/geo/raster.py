"""
Georeferenced multi-band rasters, areas of interest and clipping
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import CrsMismatch, InvalidRaster, NoOverlap
from geo.transform import AffineGeoTransform

logger = logging.getLogger(__name__)

SUPPORTED_DTYPES = (np.dtype(np.uint8), np.dtype(np.uint16), np.dtype(np.float32))

# Tolerance used when snapping world bounds to pixel edges
EDGE_EPS = 1e-6


@dataclass(frozen=True)
class AOI:
    """Axis-aligned world rectangle in meters"""
    min_x: float
    min_y: float
    max_x: float
    max_y: float
    crs_id: str = ""

    def __post_init__(self):
        values = (self.min_x, self.min_y, self.max_x, self.max_y)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"AOI corners must be finite: {values}")
        if not (self.min_x < self.max_x and self.min_y < self.max_y):
            raise ValueError(f"AOI needs min < max on both axes: {values}")

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    @property
    def area(self) -> float:
        return self.width * self.height

    def intersection(self, other: "AOI") -> Optional["AOI"]:
        """Overlap rectangle, or None when the overlap has zero area"""
        min_x = max(self.min_x, other.min_x)
        min_y = max(self.min_y, other.min_y)
        max_x = min(self.max_x, other.max_x)
        max_y = min(self.max_y, other.max_y)
        if min_x >= max_x or min_y >= max_y:
            return None
        return AOI(min_x, min_y, max_x, max_y, self.crs_id)

    def intersects(self, other: "AOI") -> bool:
        return self.intersection(other) is not None

    def contains(self, other: "AOI", tol: float = 0.0) -> bool:
        return (self.min_x - tol <= other.min_x and self.min_y - tol <= other.min_y
                and other.max_x <= self.max_x + tol and other.max_y <= self.max_y + tol)

    def to_dict(self) -> dict:
        return {"min_x": self.min_x, "min_y": self.min_y,
                "max_x": self.max_x, "max_y": self.max_y, "crs_id": self.crs_id}

    @classmethod
    def from_dict(cls, d: dict) -> "AOI":
        return cls(float(d["min_x"]), float(d["min_y"]), float(d["max_x"]),
                   float(d["max_y"]), str(d.get("crs_id", "")))


@dataclass(frozen=True)
class BandMeta:
    """Per-band descriptive metadata"""
    name: str
    gsd_m: float
    wavelength: str = ""

    @property
    def is_mask(self) -> bool:
        lowered = self.name.lower()
        return any(tag in lowered for tag in ("mask", "qa", "cloud", "alpha"))

    @property
    def is_pan(self) -> bool:
        lowered = self.name.lower()
        return "pan" in lowered


@dataclass(frozen=True)
class RasterBand:
    """One 2D sample grid with its own geotransform"""
    data: np.ndarray
    transform: AffineGeoTransform
    meta: BandMeta
    nodata: Optional[float] = None

    def __post_init__(self):
        if self.data.ndim != 2:
            raise InvalidRaster(f"Band '{self.meta.name}' must be 2D, got shape {self.data.shape}")
        if self.data.shape[0] == 0 or self.data.shape[1] == 0:
            raise InvalidRaster(f"Band '{self.meta.name}' is empty")
        if self.data.dtype not in SUPPORTED_DTYPES:
            raise InvalidRaster(
                f"Band '{self.meta.name}' has unsupported sample type {self.data.dtype}; "
                f"expected uint8, uint16 or float32"
            )
        if abs(self.meta.gsd_m - self.transform.gsd) > 1e-6:
            raise InvalidRaster(
                f"Band '{self.meta.name}' nominal GSD {self.meta.gsd_m} m does not match "
                f"|pixel_width| {self.transform.gsd} m"
            )

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def gsd(self) -> float:
        return self.transform.gsd

    def footprint(self, crs_id: str = "") -> AOI:
        """World bounding box of the full grid"""
        cols = np.array([0.0, self.width, 0.0, self.width])
        rows = np.array([0.0, 0.0, self.height, self.height])
        xs, ys = self.transform.project_xy(cols, rows)
        return AOI(float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()), crs_id)

    def with_data(self, data: np.ndarray, transform: Optional[AffineGeoTransform] = None) -> "RasterBand":
        """Copy of this band with new samples (and optionally a new grid)"""
        transform = transform or self.transform
        meta = self.meta
        if abs(meta.gsd_m - transform.gsd) > 1e-6:
            meta = replace(meta, gsd_m=transform.gsd)
        return RasterBand(data=data, transform=transform, meta=meta, nodata=self.nodata)


@dataclass(frozen=True)
class GeoRaster:
    """A scene: bands that may differ in resolution, one shared CRS"""
    bands: Tuple[RasterBand, ...]
    crs_id: str
    scene_id: str = ""
    tags: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.bands:
            raise InvalidRaster("A raster needs at least one band")
        object.__setattr__(self, "bands", tuple(self.bands))
        declared = self.bands[0].footprint(self.crs_id)
        for band in self.bands[1:]:
            if not band.footprint(self.crs_id).intersects(declared):
                raise InvalidRaster(f"Band '{band.meta.name}' does not overlap the raster footprint")

    @property
    def band_names(self) -> List[str]:
        return [b.meta.name for b in self.bands]

    def reference_band(self) -> int:
        """Index of the panchromatic band if there is one, else 0"""
        for i, band in enumerate(self.bands):
            if band.meta.is_pan:
                return i
        return 0

    def with_bands(self, bands: Sequence[RasterBand]) -> "GeoRaster":
        return GeoRaster(bands=tuple(bands), crs_id=self.crs_id, scene_id=self.scene_id, tags=dict(self.tags))


def footprint(r: GeoRaster) -> AOI:
    """World bounding box of band 0"""
    return r.bands[0].footprint(r.crs_id)


def _clip_band(band: RasterBand, aoi: AOI) -> Optional[RasterBand]:
    xs = np.array([aoi.min_x, aoi.max_x, aoi.min_x, aoi.max_x])
    ys = np.array([aoi.min_y, aoi.min_y, aoi.max_y, aoi.max_y])
    cols, rows = band.transform.backproject_xy(xs, ys)

    col0 = max(0, int(math.floor(cols.min() + EDGE_EPS)))
    col1 = min(band.width, int(math.ceil(cols.max() - EDGE_EPS)))
    row0 = max(0, int(math.floor(rows.min() + EDGE_EPS)))
    row1 = min(band.height, int(math.ceil(rows.max() - EDGE_EPS)))
    if col1 <= col0 or row1 <= row0:
        return None

    if (col0, row0, col1, row1) == (0, 0, band.width, band.height):
        return band
    data = np.array(band.data[row0:row1, col0:col1], copy=True)
    return band.with_data(data, band.transform.shifted(col0, row0))


def clip(r: GeoRaster, aoi: AOI) -> GeoRaster:
    """
    Cut every band down to the smallest pixel-aligned window covering aoi

    Args:
        r: raster to clip
        aoi: world rectangle in the raster's CRS

    Returns:
        Clipped raster; retained pixels keep their world coordinates
    """
    if aoi.crs_id and r.crs_id and aoi.crs_id != r.crs_id:
        raise CrsMismatch(f"AOI is in {aoi.crs_id}, raster is in {r.crs_id}")
    if not footprint(r).intersects(aoi):
        raise NoOverlap(f"AOI {aoi.to_dict()} does not overlap raster {r.scene_id or '<unnamed>'}")

    clipped = []
    for band in r.bands:
        result = _clip_band(band, aoi)
        if result is None:
            raise NoOverlap(f"AOI does not overlap band '{band.meta.name}'")
        clipped.append(result)

    logger.debug("Clipped %s to %s", r.scene_id or "<unnamed>", aoi.to_dict())
    return r.with_bands(clipped)
