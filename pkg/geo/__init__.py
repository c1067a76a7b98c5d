"""
Georeferenced raster types and coordinate mapping
"""
from .transform import AffineGeoTransform, PixelPoint, WorldPoint, project, backproject
from .raster import AOI, BandMeta, RasterBand, GeoRaster, clip, footprint
from .bands import SensorBands

__all__ = [
    'AffineGeoTransform', 'PixelPoint', 'WorldPoint', 'project', 'backproject',
    'AOI', 'BandMeta', 'RasterBand', 'GeoRaster', 'clip', 'footprint',
    'SensorBands',
]
