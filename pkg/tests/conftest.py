"""
Shared fixtures: georeferenced bands, textured grids and tiepoint sets
"""
import numpy as np
import pytest

from geo.raster import BandMeta, GeoRaster, RasterBand
from geo.transform import AffineGeoTransform
from synthetic import make_texture

ORIGIN_X, ORIGIN_Y = 500000.0, 4200000.0


def make_band(data, gsd=10.0, name="pan", nodata=None, origin=(ORIGIN_X, ORIGIN_Y)):
    data = np.asarray(data)
    if data.dtype == np.float64:
        data = data.astype(np.float32)
    gt = AffineGeoTransform(origin[0], origin[1], gsd, -gsd)
    return RasterBand(data=data, transform=gt, meta=BandMeta(name, gsd), nodata=nodata)


def make_raster(*bands, crs_id="EPSG:32611", scene_id="scene"):
    return GeoRaster(bands=tuple(bands), crs_id=crs_id, scene_id=scene_id)


@pytest.fixture
def texture():
    return make_texture(128, 128, seed=3)


@pytest.fixture
def textured_band(texture):
    return make_band(texture)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
