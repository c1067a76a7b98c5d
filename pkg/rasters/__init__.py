"""
Raster readers/writers with format auto-detection
"""
from typing import List, Sequence, Union

from errors import CrsMismatch, InvalidRaster
from geo.raster import GeoRaster
from utils.validator import FileValidator

from .base_reader import BaseRasterReader
from .geotiff_reader import GeoTiffReader
from .sidecar_reader import SidecarReader

READERS = {
    "geotiff": GeoTiffReader,
    "sidecar": SidecarReader,
}


def read_raster(paths: Union[str, Sequence[str]]) -> GeoRaster:
    """
    Read a raster from one file, or concatenate single-scene band files

    Args:
        paths: a path, or a list of paths holding bands of one scene

    Returns:
        GeoRaster with bands in the order given
    """
    if isinstance(paths, str):
        paths = [paths]
    if not paths:
        raise InvalidRaster("No raster paths given")

    rasters = []
    for path in paths:
        fmt = FileValidator.raster_format(path)
        is_valid, message = FileValidator.validate_file(path, kind="raster")
        if not is_valid:
            raise InvalidRaster(message)
        reader = READERS[fmt](path)
        rasters.append(reader.read())

    first = rasters[0]
    if len(rasters) == 1:
        return first
    bands = []
    for raster in rasters:
        if raster.crs_id != first.crs_id:
            raise CrsMismatch(f"Band files mix CRS {first.crs_id} and {raster.crs_id}")
        bands.extend(raster.bands)
    return GeoRaster(bands=tuple(bands), crs_id=first.crs_id, scene_id=first.scene_id, tags=dict(first.tags))


def write_raster(raster: GeoRaster, path: str) -> List[str]:
    """Write a raster in the format implied by the extension of path"""
    return READERS[FileValidator.raster_format(path)].write(raster, path)


__all__ = ['BaseRasterReader', 'GeoTiffReader', 'SidecarReader', 'read_raster', 'write_raster']
