import numpy as np
import pytest
from affine import Affine

from errors import CrsMismatch, InvalidRaster, NoOverlap, SingularTransform
from geo import AOI, AffineGeoTransform, PixelPoint, WorldPoint, backproject, clip, footprint, project
from geo.bands import SensorBands
from geo.raster import BandMeta, GeoRaster, RasterBand

from conftest import make_band, make_raster


GT10 = AffineGeoTransform(0.0, 0.0, 10.0, -10.0)


class TestProjection:
    def test_origin_is_fixed_point(self):
        assert project(GT10, PixelPoint(0, 0)) == WorldPoint(0.0, 0.0)
        assert backproject(GT10, WorldPoint(0, 0)) == PixelPoint(0.0, 0.0)

    def test_direct_arithmetic(self):
        assert project(GT10, PixelPoint(3, 2)) == WorldPoint(30.0, -20.0)
        assert backproject(GT10, WorldPoint(30, -20)) == PixelPoint(3.0, 2.0)

    def test_rotation_matches_matrix_product(self):
        gt = AffineGeoTransform(100.0, 200.0, 10.0, -10.0, row_rotation=1.0, col_rotation=1.0)
        matrix = np.array([[10.0, 1.0, 100.0], [1.0, -10.0, 200.0]])
        expected = matrix @ np.array([1.0, 1.0, 1.0])
        w = project(gt, PixelPoint(1, 1))
        assert (w.x, w.y) == pytest.approx(tuple(expected), abs=1e-12)

    def test_round_trip(self, rng):
        gt = AffineGeoTransform(500000.0, 4200000.0, 10.0, -10.0, row_rotation=0.3, col_rotation=-0.2)
        xs = rng.uniform(400000, 600000, 100000)
        ys = rng.uniform(4100000, 4300000, 100000)
        cols, rows = gt.backproject_xy(xs, ys)
        xs2, ys2 = gt.project_xy(cols, rows)
        assert np.max(np.abs(xs2 - xs)) < 1e-9
        assert np.max(np.abs(ys2 - ys)) < 1e-9

    def test_singular_transform(self):
        gt = AffineGeoTransform(0.0, 0.0, 10.0, 10.0, row_rotation=10.0, col_rotation=10.0)
        assert not gt.is_invertible
        with pytest.raises(SingularTransform):
            backproject(gt, WorldPoint(1.0, 1.0))

    def test_non_finite_points_rejected(self):
        with pytest.raises(ValueError):
            PixelPoint(float("nan"), 0.0)

    def test_affine_interop(self):
        gt = AffineGeoTransform(10.0, 20.0, 4.0, -4.0, 0.5, 0.25)
        assert AffineGeoTransform.from_affine(gt.to_affine()) == gt
        assert gt.to_affine() * (2, 3) == pytest.approx(gt.project_xy(2, 3))
        assert Affine.from_gdal(*gt.to_gdal()) == gt.to_affine()

    def test_scaled_keeps_origin(self):
        coarse = GT10.scaled(3.0)
        assert (coarse.origin_x, coarse.origin_y) == (0.0, 0.0)
        assert coarse.gsd == 30.0


class TestRaster:
    def test_gsd_must_match_geotransform(self):
        gt = AffineGeoTransform(0.0, 0.0, 10.0, -10.0)
        with pytest.raises(InvalidRaster):
            RasterBand(np.zeros((4, 4), np.uint8), gt, BandMeta("b", 15.0))

    def test_unsupported_dtype(self):
        with pytest.raises(InvalidRaster):
            RasterBand(np.zeros((4, 4), np.int32), GT10, BandMeta("b", 10.0))

    def test_bands_must_overlap(self):
        a = make_band(np.zeros((10, 10)), origin=(0.0, 0.0))
        b = make_band(np.zeros((10, 10)), origin=(1000.0, 0.0), name="b")
        with pytest.raises(InvalidRaster):
            GeoRaster(bands=(a, b), crs_id="x")

    def test_reference_band_prefers_pan(self):
        red = make_band(np.zeros((10, 10)), gsd=30.0, name="red")
        pan = make_band(np.zeros((20, 20)), gsd=15.0, name="Panchromatic")
        assert make_raster(red, pan).reference_band() == 1
        assert make_raster(red).reference_band() == 0

    def test_footprint(self):
        band = make_band(np.zeros((100, 100)), origin=(0.0, 1000.0))
        assert footprint(make_raster(band)) == AOI(0.0, 0.0, 1000.0, 1000.0, "EPSG:32611")


class TestClip:
    def _raster(self):
        data = np.arange(100 * 100, dtype=np.float32).reshape(100, 100)
        return make_raster(make_band(data, origin=(0.0, 1000.0)))

    def test_full_footprint_is_identity(self):
        r = self._raster()
        clipped = clip(r, footprint(r))
        assert clipped.bands[0] is r.bands[0]

    def test_left_half(self):
        clipped = clip(self._raster(), AOI(0.0, 0.0, 500.0, 1000.0))
        band = clipped.bands[0]
        assert (band.width, band.height) == (50, 100)
        assert band.transform.origin_x == 0.0

    def test_world_coordinates_preserved(self, rng):
        r = self._raster()
        for _ in range(20):
            x0, x1 = np.sort(rng.uniform(0, 1000, 2))
            y0, y1 = np.sort(rng.uniform(0, 1000, 2))
            if x1 - x0 < 1 or y1 - y0 < 1:
                continue
            aoi = AOI(x0, y0, x1, y1)
            old = r.bands[0]
            new = clip(r, aoi).bands[0]
            col0, row0 = old.transform.backproject_xy(new.transform.origin_x, new.transform.origin_y)
            col0, row0 = int(round(col0)), int(round(row0))
            assert np.array_equal(new.data, old.data[row0:row0 + new.height, col0:col0 + new.width])
            assert new.transform.project_xy(1, 1) == old.transform.project_xy(col0 + 1, row0 + 1)
            fp = new.footprint()
            assert fp.contains(aoi, tol=1e-4)
            assert footprint(r).contains(fp)

    def test_no_overlap(self):
        with pytest.raises(NoOverlap):
            clip(self._raster(), AOI(2000.0, 2000.0, 3000.0, 3000.0))

    def test_crs_mismatch(self):
        with pytest.raises(CrsMismatch):
            clip(self._raster(), AOI(0.0, 0.0, 10.0, 10.0, crs_id="EPSG:4326"))


class TestAOI:
    def test_invalid_corners(self):
        with pytest.raises(ValueError):
            AOI(10.0, 0.0, 0.0, 10.0)

    def test_intersection_area(self):
        a = AOI(0, 0, 10, 10)
        b = AOI(5, 5, 20, 20)
        assert a.intersection(b).area == 25.0
        assert a.intersection(AOI(10, 0, 20, 10)) is None


def test_sensor_band_tables():
    assert SensorBands.lookup("landsat8", "b8")[2] == 15.0
    assert SensorBands.lookup("sentinel2", "B4") == SensorBands.lookup("sentinel2", "b04")
    assert SensorBands.lookup("sentinel2", "B8A")[2] == 20.0
    assert SensorBands.lookup("planet", "X") is None


@pytest.mark.parametrize("file_name, sensor", [
    ("LC08_L1TP_040037_20190101_B4.TIF", "landsat8"),
    ("S2A_MSIL1C_20190101_T11SKA_B04.jp2", "sentinel2"),
    ("global_monthly_2019_01_mosaic_L15-0331E-1257N.tif", "planet"),
    ("scene.tif", ""),
])
def test_guess_sensor(file_name, sensor):
    assert SensorBands.guess_sensor(file_name) == sensor


def test_band_labels():
    assert SensorBands.label("sentinel2", 0, 1, "T11SKA_B8A.jp2")[0] == "B8A"
    assert SensorBands.label("landsat8", 0, 1, "LC08_scene.tif") is None
    assert SensorBands.label("planet", 3, 4)[1] == "Alpha mask"
    assert SensorBands.label("planet", 0, 3) is None
    assert SensorBands.label("", 0, 1, "x_B4.tif") is None
    assert SensorBands.band_name(SensorBands.lookup("landsat8", "B8")) == "B8 Panchromatic"
