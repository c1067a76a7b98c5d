"""
Synthetic base/warp pairs with a known correction model

Textures are seeded band-limited noise plus Gaussian blobs, so corner
density is high and every run is reproducible.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from errors import ConfigError
from geo.bands import SensorBands
from geo.raster import BandMeta, GeoRaster, RasterBand
from geo.transform import AffineGeoTransform
from alignment.correction_model import CorrectionModel, ModelKind
from alignment.resample import InterpolationMethod, sample, to_working_resolution
from alignment.tiepoints import TiePointSet
from utils.cleaner import TiePointCleaner

logger = logging.getLogger(__name__)

NODATA = -9999.0
ORIGIN = (500000.0, 4200000.0)
INVERSE_ITERATIONS = 60
# Base bands are labelled as a Planet mosaic, warp bands as Landsat 8 (15 m pan, 30 m red)
BASE_SENSOR, BASE_BANDS = "planet", ("R", "G")
WARP_SENSOR, WARP_BANDS = "landsat8", ("B8", "B4")


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Recipe for one synthetic pair

    width, height: base image size in base pixels
    resolution_ratio: warp GSD / base GSD (>= 1)
    true_model: base -> warp mapping at working resolution
    """
    width: int = 256
    height: int = 256
    seed: int = 0
    true_model: CorrectionModel = field(default_factory=lambda: CorrectionModel.identity(ModelKind.AFFINE))
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    resolution_ratio: float = 1.0
    base_gsd: float = 10.0
    tiepoint_count: int = 200
    crs_id: str = "EPSG:32611"
    multiband: bool = False

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise ConfigError(f"Synthetic images need at least 16x16 pixels, got {self.width}x{self.height}")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ConfigError(f"outlier_fraction must be in [0, 1), got {self.outlier_fraction}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.resolution_ratio < 1.0:
            raise ConfigError(f"resolution_ratio must be >= 1, got {self.resolution_ratio}")
        if self.base_gsd <= 0:
            raise ConfigError(f"base_gsd must be > 0, got {self.base_gsd}")

    @property
    def working_gsd(self) -> float:
        return self.base_gsd * self.resolution_ratio

    @property
    def working_size(self) -> Tuple[int, int]:
        return (int(math.floor(self.width / self.resolution_ratio + 1e-9)),
                int(math.floor(self.height / self.resolution_ratio + 1e-9)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "width": self.width, "height": self.height, "seed": self.seed,
            "true_model": self.true_model.to_dict(), "noise_sigma": self.noise_sigma,
            "outlier_fraction": self.outlier_fraction, "resolution_ratio": self.resolution_ratio,
            "base_gsd": self.base_gsd, "tiepoint_count": self.tiepoint_count,
            "crs_id": self.crs_id, "multiband": self.multiband,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SyntheticSpec":
        defaults = cls()
        model = d.get("true_model")
        return cls(
            width=int(d.get("width", defaults.width)),
            height=int(d.get("height", defaults.height)),
            seed=int(d.get("seed", defaults.seed)),
            true_model=CorrectionModel.from_dict(model) if model else defaults.true_model,
            noise_sigma=float(d.get("noise_sigma", defaults.noise_sigma)),
            outlier_fraction=float(d.get("outlier_fraction", defaults.outlier_fraction)),
            resolution_ratio=float(d.get("resolution_ratio", defaults.resolution_ratio)),
            base_gsd=float(d.get("base_gsd", defaults.base_gsd)),
            tiepoint_count=int(d.get("tiepoint_count", defaults.tiepoint_count)),
            crs_id=str(d.get("crs_id", defaults.crs_id)),
            multiband=bool(d.get("multiband", defaults.multiband)),
        )


def make_texture(width: int, height: int, seed: int) -> np.ndarray:
    """Band-limited noise with blob features, scaled to roughly 600..1400"""
    rng = np.random.default_rng([seed, 0])
    noise = gaussian_filter(rng.standard_normal((height, width)), sigma=2.0)
    noise /= noise.std() or 1.0

    blobs = np.zeros((height, width))
    count = max(8, (width * height) // 400)
    centers_x = rng.uniform(0, width, count)
    centers_y = rng.uniform(0, height, count)
    radii = rng.uniform(1.5, 5.0, count)
    amplitudes = rng.choice([-1.0, 1.0], count) * rng.uniform(1.0, 3.0, count)
    for cx, cy, r, amp in zip(centers_x, centers_y, radii, amplitudes):
        reach = int(math.ceil(3 * r))
        x0, x1 = max(0, int(cx) - reach), min(width, int(cx) + reach + 1)
        y0, y1 = max(0, int(cy) - reach), min(height, int(cy) + reach + 1)
        yy, xx = np.mgrid[y0:y1, x0:x1]
        blobs[y0:y1, x0:x1] += amp * np.exp(-((xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2) / (2 * r * r))

    texture = noise + blobs
    texture = (texture - texture.mean()) / (texture.std() or 1.0)
    return (1000.0 + 150.0 * texture).astype(np.float32)


def invert_points(model: CorrectionModel, xs: np.ndarray, ys: np.ndarray,
                  iterations: int = INVERSE_ITERATIONS) -> Tuple[np.ndarray, np.ndarray]:
    """Solve model(p) = (xs, ys) for p by fixed-point iteration (near-identity models)"""
    px, py = np.array(xs, dtype=np.float64), np.array(ys, dtype=np.float64)
    for _ in range(iterations):
        fx, fy = model.evaluate_xy(px, py)
        px += xs - fx
        py += ys - fy
    return px, py


def band_meta(sensor: str, band_id: str, gsd: float) -> BandMeta:
    spec = SensorBands.lookup(sensor, band_id)
    return BandMeta(SensorBands.band_name(spec), gsd, spec[3])


def _warp_band(working_base: RasterBand, warp_working_gt: AffineGeoTransform,
               band_gt: AffineGeoTransform, width: int, height: int,
               model: CorrectionModel, band_id: str) -> RasterBand:
    cols, rows = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    wx, wy = band_gt.project_xy(cols, rows)
    xw, yw = warp_working_gt.backproject_xy(wx, wy)
    xb, yb = invert_points(model, xw, yw)
    data = sample(working_base, xb, yb, InterpolationMethod.BILINEAR)
    return RasterBand(data=data, transform=band_gt, meta=band_meta(WARP_SENSOR, band_id, band_gt.gsd),
                      nodata=NODATA)


def generate_synthetic(spec: SyntheticSpec) -> Tuple[GeoRaster, GeoRaster, CorrectionModel]:
    """
    Textured base image and a warp image resampled through the inverse of the true model

    Returns:
        (base, warp, true_model); the model maps working base pixels to
        working warp pixels
    """
    base_gt = AffineGeoTransform(ORIGIN[0], ORIGIN[1], spec.base_gsd, -spec.base_gsd)
    texture = make_texture(spec.width, spec.height, spec.seed)
    base_meta = band_meta(BASE_SENSOR, BASE_BANDS[0], spec.base_gsd)
    base_main = RasterBand(data=texture, transform=base_gt, meta=base_meta, nodata=NODATA)

    working_base = to_working_resolution(base_main, spec.working_gsd, InterpolationMethod.AREA_AVERAGE)
    warp_gt = working_base.transform
    ww, wh = working_base.width, working_base.height
    warp_main = _warp_band(working_base, warp_gt, warp_gt, ww, wh, spec.true_model, WARP_BANDS[0])

    base_bands = [base_main]
    warp_bands = [warp_main]
    if spec.multiband:
        base_coarse = to_working_resolution(base_main, 2 * spec.base_gsd, InterpolationMethod.AREA_AVERAGE)
        base_bands.append(RasterBand(data=base_coarse.data, transform=base_coarse.transform,
                                     meta=band_meta(BASE_SENSOR, BASE_BANDS[1], base_coarse.gsd), nodata=NODATA))
        coarse_gt = warp_gt.scaled(2.0)
        warp_bands.append(_warp_band(working_base, warp_gt, coarse_gt, max(1, ww // 2), max(1, wh // 2),
                                     spec.true_model, WARP_BANDS[1]))

    seed_tag = {"synthetic_seed": str(spec.seed)}
    base = GeoRaster(bands=tuple(base_bands), crs_id=spec.crs_id, scene_id=f"synthetic-{spec.seed}-base",
                     tags={**seed_tag, "sensor": BASE_SENSOR})
    warp = GeoRaster(bands=tuple(warp_bands), crs_id=spec.crs_id, scene_id=f"synthetic-{spec.seed}-warp",
                     tags={**seed_tag, "sensor": WARP_SENSOR})
    logger.info("Generated synthetic pair seed=%d: base %dx%d @ %.1f m, warp %dx%d @ %.1f m",
                spec.seed, spec.width, spec.height, spec.base_gsd, ww, wh, spec.working_gsd)
    return base, warp, spec.true_model


def synthesize_tiepoints(spec: SyntheticSpec, true_model: Optional[CorrectionModel] = None,
                         margin: float = 2.0) -> TiePointSet:
    """
    Tiepoints drawn from the true model with Gaussian noise and uniform outliers

    The boolean "outlier" list in meta marks the corrupted points.
    """
    model = true_model or spec.true_model
    rng = np.random.default_rng([spec.seed, 1])
    width, height = spec.working_size
    n = spec.tiepoint_count

    base = np.column_stack([rng.uniform(margin, width - margin, n), rng.uniform(margin, height - margin, n)])
    wx, wy = model.evaluate_xy(base[:, 0], base[:, 1])
    warp = np.column_stack([wx, wy])
    if spec.noise_sigma > 0:
        warp = warp + rng.normal(0.0, spec.noise_sigma, warp.shape)

    outlier = np.zeros(n, dtype=bool)
    n_out = int(round(spec.outlier_fraction * n))
    if n_out:
        picked = rng.choice(n, size=n_out, replace=False)
        outlier[picked] = True
        warp[picked] = np.column_stack([rng.uniform(0, width, n_out), rng.uniform(0, height, n_out)])

    scores = np.where(outlier, 0.5, 1.0)
    keep = TiePointCleaner.clean_mask(base, warp, (width, height))
    if not keep.all():
        logger.debug("Dropped %d synthetic tiepoints outside the grid", int((~keep).sum()))
    return TiePointSet(base[keep], warp[keep], scores[keep], provenance=f"synthetic:{spec.seed}",
                       working_gsd=spec.working_gsd, base_size=(width, height), warp_size=(width, height),
                       meta={"outlier": outlier[keep].tolist()})
