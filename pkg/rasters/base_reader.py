"""
Base raster reader class that all raster formats inherit from
"""
from abc import ABC, abstractmethod
from typing import List, Tuple
import os

from errors import InvalidRaster
from geo.bands import SensorBands
from geo.raster import GeoRaster


class BaseRasterReader(ABC):
    """Abstract base class for all raster readers/writers"""

    def __init__(self, file_path: str):
        if not os.path.exists(file_path):
            raise InvalidRaster(f"File does not exist: {file_path}")
        self.file_path = file_path
        self.file_name = os.path.basename(file_path)

    @abstractmethod
    def read(self) -> GeoRaster:
        """Read the file into a GeoRaster"""
        pass

    @staticmethod
    @abstractmethod
    def write(raster: GeoRaster, path: str) -> List[str]:
        """Write a raster, returning every file created"""
        pass

    def default_scene_id(self) -> str:
        return os.path.splitext(self.file_name)[0]

    def fallback_band_name(self, sensor: str, index: int, count: int) -> Tuple[str, str]:
        """
        Name and wavelength for a band stored without a name

        Looked up in the sensor band tables; "band<N>" (1-based) otherwise.
        """
        spec = SensorBands.label(sensor, index, count, self.file_name)
        if spec is None:
            return f"band{index + 1}", ""
        return SensorBands.band_name(spec), spec[3]
