"""
Portable raster format: raw little-endian sample grids plus a JSON sidecar
"""
import json
import logging
import os
import re
from typing import Dict, Any, List

import numpy as np

from errors import InvalidRaster, ParseError
from geo.bands import SensorBands
from geo.raster import BandMeta, GeoRaster, RasterBand
from geo.transform import AffineGeoTransform
from .base_reader import BaseRasterReader

logger = logging.getLogger(__name__)

FORMAT_NAME = "coreg-raw"
FORMAT_VERSION = 1

SAMPLE_TYPES = {
    "uint8": np.dtype("<u1"),
    "uint16": np.dtype("<u2"),
    "float32": np.dtype("<f4"),
}


class SidecarReader(BaseRasterReader):
    """Read a JSON sidecar document and the raw band files it references"""

    def __init__(self, file_path: str):
        super().__init__(file_path)
        self.document = self._load_document()
        tags = self.document.get("tags") or {}
        self.sensor = str(tags.get("sensor") or SensorBands.guess_sensor(self.file_name))

    def _load_document(self) -> Dict[str, Any]:
        try:
            with open(self.file_path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"Invalid sidecar JSON: {e.msg}", line=e.lineno) from e

        if document.get("format") != FORMAT_NAME:
            raise ParseError(f"Not a {FORMAT_NAME} sidecar: format={document.get('format')!r}")
        if int(document.get("version", 0)) != FORMAT_VERSION:
            raise ParseError(f"Unsupported sidecar version {document.get('version')}")
        if not isinstance(document.get("bands"), list) or not document["bands"]:
            raise ParseError("Sidecar must list at least one band")
        return document

    def _read_band(self, index: int, entry: Dict[str, Any]) -> RasterBand:
        try:
            width = int(entry["width"])
            height = int(entry["height"])
            sample_type = entry["dtype"]
            transform = AffineGeoTransform.from_gdal(entry["geotransform"])
            file_name = entry["file"]
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"Bad band entry: {e}", index=index) from e
        if sample_type not in SAMPLE_TYPES:
            raise ParseError(f"Unsupported sample type {sample_type!r}", index=index)

        raw_path = os.path.join(os.path.dirname(self.file_path), file_name)
        if not os.path.exists(raw_path):
            raise InvalidRaster(f"Missing sample file {raw_path}")
        samples = np.fromfile(raw_path, dtype=SAMPLE_TYPES[sample_type])
        if samples.size != width * height:
            raise InvalidRaster(
                f"{file_name}: expected {width * height} samples, found {samples.size}"
            )
        data = samples.reshape(height, width).astype(SAMPLE_TYPES[sample_type].newbyteorder("="))

        nodata = entry.get("nodata")
        name, wavelength = entry.get("name"), str(entry.get("wavelength", ""))
        if not name:
            name, wavelength = self.fallback_band_name(self.sensor, index, len(self.document["bands"]))
        meta = BandMeta(name=str(name), gsd_m=float(entry.get("gsd_m", transform.gsd)), wavelength=wavelength)
        return RasterBand(data=data, transform=transform, meta=meta,
                          nodata=None if nodata is None else float(nodata))

    def read(self) -> GeoRaster:
        """Read every band listed in the sidecar"""
        bands = [self._read_band(i, entry) for i, entry in enumerate(self.document["bands"])]
        logger.debug("Read %s: %d band(s)", self.file_name, len(bands))
        return GeoRaster(
            bands=tuple(bands),
            crs_id=str(self.document.get("crs_id", "")),
            scene_id=str(self.document.get("scene_id") or self.default_scene_id()),
            tags=dict(self.document.get("tags", {})),
        )

    @staticmethod
    def write(raster: GeoRaster, path: str) -> List[str]:
        """
        Write the sidecar at path and one .raw file per band beside it

        Returns:
            List of files written, sidecar first
        """
        directory = os.path.dirname(path) or "."
        stem = os.path.splitext(os.path.basename(path))[0]
        entries = []
        written = [path]
        for i, band in enumerate(raster.bands):
            sample_type = band.data.dtype.name
            if sample_type not in SAMPLE_TYPES:
                raise InvalidRaster(f"Cannot write sample type {sample_type}")
            file_name = f"{stem}_b{i:02d}_{re.sub(r'[^A-Za-z0-9_.-]+', '_', band.meta.name)}.raw"
            band.data.astype(SAMPLE_TYPES[sample_type]).tofile(os.path.join(directory, file_name))
            written.append(os.path.join(directory, file_name))
            entries.append({
                "file": file_name,
                "width": band.width,
                "height": band.height,
                "dtype": sample_type,
                "geotransform": list(band.transform.to_gdal()),
                "nodata": band.nodata,
                "name": band.meta.name,
                "gsd_m": band.meta.gsd_m,
                "wavelength": band.meta.wavelength,
            })

        document = {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "scene_id": raster.scene_id,
            "crs_id": raster.crs_id,
            "tags": raster.tags,
            "bands": entries,
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(document, f, indent=2)
        return written
