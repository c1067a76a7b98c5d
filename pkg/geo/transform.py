"""
Affine pixel <-> world mapping for georeferenced grids

Pixel (0, 0) is the outer corner of the top-left pixel; the center of
pixel (col, row) is (col + 0.5, row + 0.5).
"""
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from affine import Affine

from errors import SingularTransform

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class PixelPoint:
    """Continuous pixel coordinate (column, row)"""
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Pixel coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class WorldPoint:
    """Projected world coordinate in meters"""
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"World coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class AffineGeoTransform:
    """
    Six-coefficient geotransform in GDAL order

    world_x = origin_x + col * pixel_width + row * row_rotation
    world_y = origin_y + col * col_rotation + row * pixel_height
    """
    origin_x: float
    origin_y: float
    pixel_width: float
    pixel_height: float
    row_rotation: float = 0.0
    col_rotation: float = 0.0

    def __post_init__(self):
        for name in ("origin_x", "origin_y", "pixel_width", "pixel_height", "row_rotation", "col_rotation"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"Geotransform {name} must be finite, got {value}")

    @property
    def determinant(self) -> float:
        return self.pixel_width * self.pixel_height - self.row_rotation * self.col_rotation

    @property
    def is_invertible(self) -> bool:
        scale = max(abs(self.pixel_width), abs(self.pixel_height),
                    abs(self.row_rotation), abs(self.col_rotation))
        return scale > 0 and abs(self.determinant) > 1e-12 * scale * scale

    @property
    def gsd(self) -> float:
        """Nominal ground sampling distance (|pixel_width|)"""
        return abs(self.pixel_width)

    def project_xy(self, cols: ArrayLike, rows: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        """Pixel -> world, elementwise over scalars or arrays"""
        xs = self.origin_x + cols * self.pixel_width + rows * self.row_rotation
        ys = self.origin_y + cols * self.col_rotation + rows * self.pixel_height
        return xs, ys

    def backproject_xy(self, xs: ArrayLike, ys: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        """World -> pixel, elementwise over scalars or arrays"""
        if not self.is_invertible:
            raise SingularTransform(f"Geotransform is not invertible (det={self.determinant})")
        det = self.determinant
        dx = xs - self.origin_x
        dy = ys - self.origin_y
        cols = (dx * self.pixel_height - dy * self.row_rotation) / det
        rows = (dy * self.pixel_width - dx * self.col_rotation) / det
        return cols, rows

    def scaled(self, factor: float) -> "AffineGeoTransform":
        """Same origin, linear part multiplied by factor (coarser grid for factor > 1)"""
        return AffineGeoTransform(
            origin_x=self.origin_x,
            origin_y=self.origin_y,
            pixel_width=self.pixel_width * factor,
            pixel_height=self.pixel_height * factor,
            row_rotation=self.row_rotation * factor,
            col_rotation=self.col_rotation * factor,
        )

    def shifted(self, col_offset: float, row_offset: float) -> "AffineGeoTransform":
        """Geotransform whose pixel (0, 0) is this one's (col_offset, row_offset)"""
        x, y = self.project_xy(col_offset, row_offset)
        return AffineGeoTransform(
            origin_x=float(x),
            origin_y=float(y),
            pixel_width=self.pixel_width,
            pixel_height=self.pixel_height,
            row_rotation=self.row_rotation,
            col_rotation=self.col_rotation,
        )

    def to_gdal(self) -> Tuple[float, float, float, float, float, float]:
        return (self.origin_x, self.pixel_width, self.row_rotation,
                self.origin_y, self.col_rotation, self.pixel_height)

    @classmethod
    def from_gdal(cls, gt) -> "AffineGeoTransform":
        if len(gt) != 6:
            raise ValueError(f"Geotransform needs 6 values, got {len(gt)}")
        c, a, b, f, d, e = (float(v) for v in gt)
        return cls(origin_x=c, origin_y=f, pixel_width=a, pixel_height=e,
                   row_rotation=b, col_rotation=d)

    def to_affine(self) -> Affine:
        return Affine.from_gdal(*self.to_gdal())

    @classmethod
    def from_affine(cls, aff: Affine) -> "AffineGeoTransform":
        return cls.from_gdal(aff.to_gdal())


def project(gt: AffineGeoTransform, p: PixelPoint) -> WorldPoint:
    """Affine projection of a pixel coordinate into world space"""
    x, y = gt.project_xy(p.x, p.y)
    return WorldPoint(float(x), float(y))


def backproject(gt: AffineGeoTransform, w: WorldPoint) -> PixelPoint:
    """Inverse affine projection of a world coordinate into pixel space"""
    col, row = gt.backproject_xy(w.x, w.y)
    return PixelPoint(float(col), float(row))
