import numpy as np
import pytest

from errors import ConfigError
from alignment.correction_model import CorrectionModel, ModelKind
from synthetic import NODATA, SyntheticSpec, generate_synthetic, invert_points, make_texture, synthesize_tiepoints

QUAD = CorrectionModel(ModelKind.QUADRATIC, (1.0, 1.01, 0.0, 1e-5, 0.0, 0.0), (-2.0, 0.0, 0.99, 0.0, 2e-5, 0.0))


def test_texture_is_reproducible():
    a = make_texture(64, 48, seed=1)
    assert a.shape == (48, 64)
    assert a.dtype == np.float32
    assert np.array_equal(a, make_texture(64, 48, seed=1))
    assert not np.array_equal(a, make_texture(64, 48, seed=2))


def test_invert_points():
    xs, ys = np.meshgrid(np.linspace(0, 100, 11), np.linspace(0, 100, 11))
    px, py = invert_points(QUAD, xs, ys)
    fx, fy = QUAD.evaluate_xy(px, py)
    assert np.max(np.abs(fx - xs)) < 1e-9
    assert np.max(np.abs(fy - ys)) < 1e-9


def test_pair_geometry():
    spec = SyntheticSpec(width=128, height=96, seed=3, resolution_ratio=2.0, multiband=True)
    base, warp, truth = generate_synthetic(spec)
    assert truth == spec.true_model
    assert base.band_names == ["R Red", "G Green"]
    assert warp.band_names == ["B8 Panchromatic", "B4 Red"]
    assert warp.tags["sensor"] == "landsat8"
    assert (base.bands[0].width, base.bands[0].height, base.bands[0].gsd) == (128, 96, 10.0)
    assert (warp.bands[0].width, warp.bands[0].height, warp.bands[0].gsd) == (64, 48, 20.0)
    assert (warp.bands[1].width, warp.bands[1].gsd) == (32, 40.0)
    assert base.crs_id == warp.crs_id == "EPSG:32611"
    assert (base.scene_id, warp.scene_id) == ("synthetic-3-base", "synthetic-3-warp")


def test_identity_warp_reproduces_working_base():
    spec = SyntheticSpec(width=64, height=64, seed=5)
    base, warp, _ = generate_synthetic(spec)
    assert np.allclose(warp.bands[0].data, base.bands[0].data, rtol=1e-5)


def test_shift_leaves_nodata_border():
    spec = SyntheticSpec(width=64, height=64, seed=5,
                         true_model=CorrectionModel(ModelKind.SHIFT, (3.0,), (0.0,)))
    _, warp, _ = generate_synthetic(spec)
    data = warp.bands[0].data
    assert np.all(data[:, :2] == NODATA)
    assert np.all(data[:, 4:] != NODATA)


def test_tiepoints_follow_model():
    spec = SyntheticSpec(seed=7, true_model=QUAD, outlier_fraction=0.25, tiepoint_count=100)
    tps = synthesize_tiepoints(spec)
    outlier = np.array(tps.meta["outlier"])
    xs, ys = QUAD.evaluate_xy(tps.base[:, 0], tps.base[:, 1])
    err = np.hypot(xs - tps.warp[:, 0], ys - tps.warp[:, 1])
    assert np.all(err[~outlier] < 1e-9)
    assert outlier.sum() <= 25
    assert np.all(tps.scores[outlier] == 0.5)
    assert tps.provenance == "synthetic:7"
    assert tps.base_size == tps.warp_size == (256, 256)


def test_tiepoint_noise_level():
    spec = SyntheticSpec(seed=8, noise_sigma=0.5, tiepoint_count=2000)
    tps = synthesize_tiepoints(spec)
    offsets = tps.warp - tps.base
    assert offsets.std() == pytest.approx(0.5, rel=0.1)


@pytest.mark.parametrize("kwargs", [
    {"width": 8},
    {"outlier_fraction": 1.0},
    {"noise_sigma": -1.0},
    {"resolution_ratio": 0.5},
    {"base_gsd": 0.0},
])
def test_spec_validation(kwargs):
    with pytest.raises(ConfigError):
        SyntheticSpec(**kwargs)


def test_spec_round_trip():
    spec = SyntheticSpec(width=100, seed=4, true_model=QUAD, noise_sigma=0.2, resolution_ratio=3.0)
    assert SyntheticSpec.from_dict(spec.to_dict()) == spec
    assert spec.working_size == (33, 85)
    assert spec.working_gsd == 30.0
