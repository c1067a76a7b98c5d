"""
GeoTIFF reader/writer backed by rasterio
"""
import logging
import os
import re
from typing import List, Optional

import rasterio
from rasterio.crs import CRS
from rasterio.errors import CRSError, RasterioIOError

from errors import InvalidRaster
from geo.bands import SensorBands
from geo.raster import BandMeta, GeoRaster, RasterBand
from geo.transform import AffineGeoTransform
from .base_reader import BaseRasterReader

logger = logging.getLogger(__name__)

CRS_TAG = "COREG_CRS_ID"
SCENE_TAG = "COREG_SCENE_ID"


def _to_crs(crs_id: str) -> Optional[CRS]:
    if not crs_id:
        return None
    try:
        return CRS.from_user_input(crs_id)
    except CRSError:
        # Opaque identifiers are kept in a dataset tag only
        return None


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


class GeoTiffReader(BaseRasterReader):
    """Read single- or multi-band GeoTIFF files"""

    def read(self) -> GeoRaster:
        """Read every band with its own tags"""
        try:
            with rasterio.open(self.file_path) as src:
                transform = AffineGeoTransform.from_affine(src.transform)
                dataset_tags = src.tags()
                crs_id = dataset_tags.get(CRS_TAG) or (src.crs.to_string() if src.crs else "")
                sensor = dataset_tags.get("sensor") or SensorBands.guess_sensor(self.file_name)
                bands = []
                for bidx in range(1, src.count + 1):
                    tags = src.tags(bidx)
                    name = tags.get("NAME") or src.descriptions[bidx - 1]
                    wavelength = tags.get("WAVELENGTH", "")
                    if not name:
                        name, wavelength = self.fallback_band_name(sensor, bidx - 1, src.count)
                    meta = BandMeta(name=name, gsd_m=transform.gsd, wavelength=wavelength)
                    nodata = src.nodatavals[bidx - 1]
                    bands.append(RasterBand(
                        data=src.read(bidx),
                        transform=transform,
                        meta=meta,
                        nodata=None if nodata is None else float(nodata),
                    ))
        except RasterioIOError as e:
            raise InvalidRaster(f"Failed to read GeoTIFF {self.file_path}: {e}") from e

        scene_id = dataset_tags.get(SCENE_TAG) or self.default_scene_id()
        logger.debug("Read %s: %d band(s), crs=%s", self.file_name, len(bands), crs_id)
        tags = {k: v for k, v in dataset_tags.items() if k not in (CRS_TAG, SCENE_TAG, "AREA_OR_POINT")}
        return GeoRaster(bands=tuple(bands), crs_id=crs_id, scene_id=scene_id, tags=tags)

    @staticmethod
    def _write_bands(bands: List[RasterBand], raster: GeoRaster, path: str) -> None:
        first = bands[0]
        profile = {
            "driver": "GTiff",
            "dtype": first.data.dtype.name,
            "width": first.width,
            "height": first.height,
            "count": len(bands),
            "transform": first.transform.to_affine(),
            "crs": _to_crs(raster.crs_id),
            "nodata": first.nodata,
        }
        with rasterio.open(path, "w", **profile) as dst:
            dst.update_tags(**{CRS_TAG: raster.crs_id, SCENE_TAG: raster.scene_id},
                            **{k: str(v) for k, v in raster.tags.items()})
            for bidx, band in enumerate(bands, start=1):
                dst.write(band.data, bidx)
                dst.set_band_description(bidx, band.meta.name)
                dst.update_tags(bidx, NAME=band.meta.name, WAVELENGTH=band.meta.wavelength)

    @staticmethod
    def write(raster: GeoRaster, path: str) -> List[str]:
        """
        Write a raster as GeoTIFF

        Bands sharing grid, dtype and nodata go into one multi-band file at
        path; otherwise each band gets its own file next to path.

        Returns:
            List of files written
        """
        first = raster.bands[0]
        shared = all(
            b.transform == first.transform and b.data.shape == first.data.shape
            and b.data.dtype == first.data.dtype and b.nodata == first.nodata
            for b in raster.bands
        )
        if shared:
            GeoTiffReader._write_bands(list(raster.bands), raster, path)
            return [path]

        stem, ext = os.path.splitext(path)
        written = []
        for i, band in enumerate(raster.bands):
            band_path = f"{stem}_{i:02d}_{_safe(band.meta.name)}{ext or '.tif'}"
            GeoTiffReader._write_bands([band], raster, band_path)
            written.append(band_path)
        return written
