"""
Resampling: downsampling to the working resolution and the multi-band
alignment chain

The alignment chain maps each output pixel center through
    out grid -> world -> working base -> model -> working warp -> world -> warp-in
and samples warp-in there.
"""
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from scipy.ndimage import map_coordinates

from errors import SingularTransform, UpsampleRequested
from geo.raster import BandMeta, GeoRaster, RasterBand
from geo.transform import AffineGeoTransform
from alignment.correction_model import CorrectionModel

logger = logging.getLogger(__name__)

# Sub-samples per axis for area averaging at non-integral GSD ratios
SUPERSAMPLE = 4
# Output rows processed per block in the alignment chain
ROW_BLOCK = 256
GSD_EPS = 1e-9


class InterpolationMethod(Enum):
    NEAREST = "nearest"
    BILINEAR = "bilinear"
    AREA_AVERAGE = "area_average"

    @classmethod
    def parse(cls, name: Union[str, "InterpolationMethod"]) -> "InterpolationMethod":
        if isinstance(name, InterpolationMethod):
            return name
        try:
            return cls(name.lower())
        except ValueError as e:
            raise ValueError(f"Unknown interpolation {name!r}; expected nearest, bilinear or area_average") from e


@dataclass(frozen=True)
class WorkingResolution:
    """Common grid on which tiepoints are found and models fitted"""
    gsd_m: float
    grid: AffineGeoTransform
    width: int
    height: int

    def grid_for(self, band: RasterBand) -> AffineGeoTransform:
        """Working grid sharing the band's origin and orientation"""
        return band.transform.scaled(self.gsd_m / band.gsd)


def default_method(meta: BandMeta) -> InterpolationMethod:
    """Nearest for categorical bands (masks, QA), bilinear for imagery"""
    return InterpolationMethod.NEAREST if meta.is_mask else InterpolationMethod.BILINEAR


def fill_value(band: RasterBand) -> float:
    """Value written where no data can be sampled"""
    if band.nodata is not None:
        return band.nodata
    return float("nan") if band.data.dtype.kind == "f" else 0.0


def _nodata_mask(values: np.ndarray, nodata: Optional[float]) -> np.ndarray:
    bad = ~np.isfinite(values) if values.dtype.kind == "f" else np.zeros(values.shape, dtype=bool)
    if nodata is not None and not math.isnan(nodata):
        bad |= values == nodata
    return bad


def _cast(values: np.ndarray, dtype: np.dtype) -> np.ndarray:
    if dtype.kind == "f":
        return values.astype(dtype)
    info = np.iinfo(dtype)
    return np.clip(np.rint(values), info.min, info.max).astype(dtype)


def sample(band: RasterBand, cols: np.ndarray, rows: np.ndarray,
           method: InterpolationMethod) -> np.ndarray:
    """
    Sample a band at continuous pixel coordinates

    Points outside [0, width) x [0, height), or touching nodata, get the
    band's fill value. Returns an array of the band's dtype.
    """
    data = band.data
    h, w = data.shape
    fill = fill_value(band)
    cols = np.asarray(cols, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.float64)
    inside = np.isfinite(cols) & np.isfinite(rows) & (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
    safe_cols = np.where(inside, cols, 0.0)
    safe_rows = np.where(inside, rows, 0.0)

    if method is InterpolationMethod.NEAREST:
        ci = np.minimum(np.floor(safe_cols).astype(np.int64), w - 1)
        ri = np.minimum(np.floor(safe_rows).astype(np.int64), h - 1)
        values = data[ri, ci]
        bad = ~inside | _nodata_mask(values, band.nodata)
        out = values.copy()
        if bad.any():
            out = np.where(bad, np.array(fill).astype(data.dtype), values)
        return out

    if method is not InterpolationMethod.BILINEAR:
        raise ValueError(f"Point sampling does not support {method.value}")

    fx = safe_cols - 0.5
    fy = safe_rows - 0.5
    values = map_coordinates(data, [fy.ravel(), fx.ravel()], order=1, mode="nearest",
                             output=np.float64).reshape(fx.shape)
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    bad = ~inside
    for ri in (np.clip(y0, 0, h - 1), np.clip(y0 + 1, 0, h - 1)):
        for ci in (np.clip(x0, 0, w - 1), np.clip(x0 + 1, 0, w - 1)):
            bad |= _nodata_mask(data[ri, ci], band.nodata)
    values = np.where(bad, 0.0, values)
    out = _cast(values, data.dtype)
    if bad.any():
        out = np.where(bad, np.array(fill).astype(data.dtype), out)
    return out


def _sample_valid(band: RasterBand, cols: np.ndarray, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest samples as float64 plus a mask of those inside the grid and not nodata"""
    inside = (np.isfinite(cols) & np.isfinite(rows) & (cols >= 0) & (cols < band.width)
              & (rows >= 0) & (rows < band.height))
    values = sample(band, cols, rows, InterpolationMethod.NEAREST).astype(np.float64)
    return values, inside & ~_nodata_mask(values, band.nodata)


def _area_average_integral(band: RasterBand, factor: int, out_w: int, out_h: int) -> np.ndarray:
    block = band.data[:out_h * factor, :out_w * factor].astype(np.float64)
    valid = ~_nodata_mask(block, band.nodata)
    values = np.where(valid, block, 0.0).reshape(out_h, factor, out_w, factor)
    counts = valid.reshape(out_h, factor, out_w, factor).sum(axis=(1, 3))
    sums = values.sum(axis=(1, 3))
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts
    out = _cast(np.where(counts > 0, means, 0.0), band.data.dtype)
    if (counts == 0).any():
        out = np.where(counts == 0, np.array(fill_value(band)).astype(band.data.dtype), out)
    return out


def _area_average_supersampled(band: RasterBand, out_gt: AffineGeoTransform,
                               out_w: int, out_h: int) -> np.ndarray:
    offsets = (np.arange(SUPERSAMPLE) + 0.5) / SUPERSAMPLE
    cols = np.arange(out_w, dtype=np.float64)
    rows = np.arange(out_h, dtype=np.float64)
    sums = np.zeros((out_h, out_w))
    counts = np.zeros((out_h, out_w))
    for oy in offsets:
        for ox in offsets:
            cc, rr = np.meshgrid(cols + ox, rows + oy)
            wx, wy = out_gt.project_xy(cc, rr)
            sc, sr = band.transform.backproject_xy(wx, wy)
            values, valid = _sample_valid(band, sc, sr)
            sums += np.where(valid, values, 0.0)
            counts += valid
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts
    out = _cast(np.where(counts > 0, means, 0.0), band.data.dtype)
    if (counts == 0).any():
        out = np.where(counts == 0, np.array(fill_value(band)).astype(band.data.dtype), out)
    return out


def to_working_resolution(band: RasterBand, target: Union[WorkingResolution, float],
                          m: InterpolationMethod = InterpolationMethod.AREA_AVERAGE) -> RasterBand:
    """
    Downsample a band onto a coarser grid with the same origin

    Args:
        band: source band
        target: working resolution (or its GSD in meters)
        m: interpolation method

    Returns:
        Band whose |pixel_width| equals the target GSD
    """
    gsd = target.gsd_m if isinstance(target, WorkingResolution) else float(target)
    ratio = gsd / band.gsd
    if ratio < 1.0 - GSD_EPS:
        raise UpsampleRequested(
            f"Band '{band.meta.name}' is {band.gsd} m; cannot resample to finer {gsd} m"
        )
    if abs(ratio - 1.0) <= GSD_EPS:
        return band

    out_gt = band.transform.scaled(ratio)
    out_w = max(1, int(math.floor(band.width / ratio + GSD_EPS)))
    out_h = max(1, int(math.floor(band.height / ratio + GSD_EPS)))

    if m is InterpolationMethod.AREA_AVERAGE:
        factor = int(round(ratio))
        if abs(ratio - factor) <= GSD_EPS:
            data = _area_average_integral(band, factor, out_w, out_h)
        else:
            data = _area_average_supersampled(band, out_gt, out_w, out_h)
    else:
        cc, rr = np.meshgrid(np.arange(out_w) + 0.5, np.arange(out_h) + 0.5)
        wx, wy = out_gt.project_xy(cc, rr)
        sc, sr = band.transform.backproject_xy(wx, wy)
        data = sample(band, sc, sr, m)

    logger.debug("Resampled '%s' %.3f m -> %.3f m (%s): %dx%d -> %dx%d", band.meta.name, band.gsd,
                 gsd, m.value, band.width, band.height, out_w, out_h)
    nodata = band.nodata
    if nodata is None and data.dtype.kind == "f" and np.isnan(data).any():
        nodata = float("nan")
    result = band.with_data(data, out_gt)
    return RasterBand(data=result.data, transform=result.transform, meta=result.meta, nodata=nodata)


def working_resolution(base: GeoRaster, warp: GeoRaster) -> WorkingResolution:
    """Coarsest reference-band GSD of the two images, on the base image's grid"""
    base_band = base.bands[base.reference_band()]
    warp_band = warp.bands[warp.reference_band()]
    gsd = max(base_band.gsd, warp_band.gsd)
    ratio = gsd / base_band.gsd
    return WorkingResolution(
        gsd_m=gsd,
        grid=base_band.transform.scaled(ratio),
        width=max(1, int(math.floor(base_band.width / ratio + GSD_EPS))),
        height=max(1, int(math.floor(base_band.height / ratio + GSD_EPS))),
    )


def chain_source_coords(working_base_gt: AffineGeoTransform, working_warp_gt: AffineGeoTransform,
                        model: CorrectionModel, warp_in_gt: AffineGeoTransform,
                        out_gt: AffineGeoTransform, cols: np.ndarray,
                        rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Warp-in pixel coordinates for output pixel coordinates (the five-step chain)"""
    wx, wy = out_gt.project_xy(cols, rows)
    xb, yb = working_base_gt.backproject_xy(wx, wy)
    xw, yw = model.evaluate_xy(xb, yb)
    wx2, wy2 = working_warp_gt.project_xy(xw, yw)
    return warp_in_gt.backproject_xy(wx2, wy2)


def resample_band_through_model(warp_in: RasterBand, working_base_gt: AffineGeoTransform,
                                working_warp_gt: AffineGeoTransform, model: CorrectionModel,
                                out_gt: AffineGeoTransform, out_width: int, out_height: int,
                                m: InterpolationMethod) -> RasterBand:
    """
    Align one warp band onto an output grid through the correction model

    Args:
        warp_in: the misaligned band at its native resolution
        working_base_gt, working_warp_gt: grids the model was fitted on
        model: base -> warp correction at working resolution
        out_gt, out_width, out_height: output grid
        m: interpolation method

    Returns:
        Aligned band on the output grid; unsampleable pixels hold nodata
    """
    for gt in (working_base_gt, working_warp_gt, out_gt, warp_in.transform):
        if not gt.is_invertible:
            raise SingularTransform(f"Geotransform {gt.to_gdal()} is not invertible")
    if m is InterpolationMethod.AREA_AVERAGE and out_gt.gsd < warp_in.gsd - GSD_EPS:
        raise UpsampleRequested("area_average needs an output grid at least as coarse as the input")

    warp_in = _with_fill_sentinel(warp_in)
    out = np.empty((out_height, out_width), dtype=warp_in.data.dtype)
    col_centers = np.arange(out_width, dtype=np.float64) + 0.5
    for start in range(0, out_height, ROW_BLOCK):
        stop = min(out_height, start + ROW_BLOCK)
        cols, rows = np.meshgrid(col_centers, np.arange(start, stop, dtype=np.float64) + 0.5)
        if m is InterpolationMethod.AREA_AVERAGE:
            out[start:stop] = _chain_area_average(warp_in, working_base_gt, working_warp_gt, model,
                                                  out_gt, cols, rows)
        else:
            sc, sr = chain_source_coords(working_base_gt, working_warp_gt, model,
                                         warp_in.transform, out_gt, cols, rows)
            out[start:stop] = sample(warp_in, sc, sr, m)

    nodata = warp_in.nodata
    if nodata is None and out.dtype.kind == "f" and np.isnan(out).any():
        nodata = float("nan")
    meta = BandMeta(warp_in.meta.name, out_gt.gsd, warp_in.meta.wavelength)
    return RasterBand(data=out, transform=out_gt, meta=meta, nodata=nodata)


def _with_fill_sentinel(band: RasterBand) -> RasterBand:
    """
    Give an integer band without nodata a sentinel outside its data range

    Uses the dtype maximum, else 0; when the band spans the whole dtype
    range it is returned unchanged and unsampleable pixels are written as 0
    without a nodata marker.
    """
    if band.nodata is not None or band.data.dtype.kind == "f":
        return band
    info = np.iinfo(band.data.dtype)
    if band.data.max() < info.max:
        return replace(band, nodata=float(info.max))
    if band.data.min() > 0:
        return replace(band, nodata=0.0)
    logger.warning("Band '%s' spans the full %s range; pixels outside the warp footprint are 0 "
                   "and not marked as nodata", band.meta.name, band.data.dtype)
    return band


def _chain_area_average(warp_in: RasterBand, working_base_gt: AffineGeoTransform,
                        working_warp_gt: AffineGeoTransform, model: CorrectionModel,
                        out_gt: AffineGeoTransform, centers_c: np.ndarray,
                        centers_r: np.ndarray) -> np.ndarray:
    offsets = (np.arange(SUPERSAMPLE) + 0.5) / SUPERSAMPLE - 0.5
    sums = np.zeros(centers_c.shape)
    counts = np.zeros(centers_c.shape)
    fill = fill_value(warp_in)
    for oy in offsets:
        for ox in offsets:
            sc, sr = chain_source_coords(working_base_gt, working_warp_gt, model,
                                         warp_in.transform, out_gt, centers_c + ox, centers_r + oy)
            values, valid = _sample_valid(warp_in, sc, sr)
            sums += np.where(valid, values, 0.0)
            counts += valid
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts
    out = _cast(np.where(counts > 0, means, 0.0), warp_in.data.dtype)
    if (counts == 0).any():
        out = np.where(counts == 0, np.array(fill).astype(warp_in.data.dtype), out)
    return out
