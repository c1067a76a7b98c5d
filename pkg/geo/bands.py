"""
Spectral band tables for the sensors handled by the pipeline
"""
import os
import re
from typing import Dict, List, Optional, Tuple

# Band id token in file names such as LC08_..._B4.TIF or T11SKA_..._B8A.jp2
BAND_TOKEN = re.compile(r"(?:^|[_.-])(B\d{1,2}A?)(?=[_.-]|$)", re.IGNORECASE)

# (band id, description, nominal GSD in meters, wavelength descriptor)
BandSpec = Tuple[str, str, float, str]


class SensorBands:
    """Band metadata per sensor, used to label bands that arrive without tags"""

    LANDSAT8: List[BandSpec] = [
        ("B1", "Coastal/Aerosol", 30.0, "0.435-0.451 um"),
        ("B2", "Blue", 30.0, "0.452-0.512 um"),
        ("B3", "Green", 30.0, "0.533-0.590 um"),
        ("B4", "Red", 30.0, "0.636-0.673 um"),
        ("B5", "Near-Infrared (NIR)", 30.0, "0.851-0.879 um"),
        ("B6", "SWIR 1", 30.0, "1.566-1.651 um"),
        ("B7", "SWIR 2", 30.0, "2.107-2.294 um"),
        ("B8", "Panchromatic", 15.0, "0.503-0.676 um"),
        ("B9", "Cirrus", 30.0, "1.363-1.384 um"),
        ("B10", "TIRS 1", 100.0, "10.60-11.19 um"),
        ("B11", "TIRS 2", 100.0, "11.50-12.51 um"),
    ]

    SENTINEL2: List[BandSpec] = [
        ("B01", "Ultra blue", 60.0, "442.7 nm / 21 nm"),
        ("B02", "Blue", 10.0, "492.4 nm / 66 nm"),
        ("B03", "Green", 10.0, "559.8 nm / 36 nm"),
        ("B04", "Red", 10.0, "664.6 nm / 31 nm"),
        ("B05", "VNIR", 20.0, "704.1 nm / 15 nm"),
        ("B06", "VNIR", 20.0, "740.5 nm / 15 nm"),
        ("B07", "VNIR", 20.0, "782.8 nm / 20 nm"),
        ("B08", "VNIR", 10.0, "832.8 nm / 106 nm"),
        ("B8A", "VNIR", 20.0, "864.7 nm / 21 nm"),
        ("B09", "SWIR", 60.0, "945.1 nm / 20 nm"),
        ("B10", "SWIR", 60.0, "1373.5 nm / 31 nm"),
        ("B11", "SWIR", 20.0, "1613.7 nm / 91 nm"),
        ("B12", "SWIR", 20.0, "2202.4 nm / 175 nm"),
    ]

    # SpaceNet-7 monthly mosaics
    PLANET: List[BandSpec] = [
        ("R", "Red", 4.0, "visible red"),
        ("G", "Green", 4.0, "visible green"),
        ("B", "Blue", 4.0, "visible blue"),
        ("A", "Alpha mask", 4.0, "mask"),
    ]

    SENSORS: Dict[str, List[BandSpec]] = {
        "landsat8": LANDSAT8,
        "sentinel2": SENTINEL2,
        "planet": PLANET,
    }

    @staticmethod
    def _canonical(band_id: str) -> str:
        # B04 and B4 name the same band
        return re.sub(r"^B0+(?=\d)", "B", band_id.strip().upper())

    @staticmethod
    def lookup(sensor: str, band_id: str) -> Optional[BandSpec]:
        """Find a band by sensor and id (case-insensitive, zero padding ignored)"""
        wanted = SensorBands._canonical(band_id)
        for spec in SensorBands.SENSORS.get(sensor.lower(), []):
            if SensorBands._canonical(spec[0]) == wanted:
                return spec
        return None

    @staticmethod
    def guess_sensor(file_name: str) -> str:
        """Sensor from common product naming, "" when the name gives no hint"""
        lowered = os.path.basename(file_name).lower()
        if lowered.startswith(("lc08", "lc8")) or "landsat" in lowered:
            return "landsat8"
        if lowered.startswith("s2") or "sentinel" in lowered:
            return "sentinel2"
        if lowered.startswith("global_monthly") or "planet" in lowered:
            return "planet"
        return ""

    @staticmethod
    def label(sensor: str, index: int, count: int, file_name: str = "") -> Optional[BandSpec]:
        """
        Table entry for band `index` (0-based) of a `count`-band file

        Single-band files are matched by the band token in their name;
        multi-band files by position when the band count equals the
        sensor's table (Planet RGBA mosaics).
        """
        bands = SensorBands.SENSORS.get(sensor.lower())
        if not bands:
            return None
        if count == 1:
            stem = os.path.splitext(os.path.basename(file_name))[0]
            match = BAND_TOKEN.search(stem)
            return SensorBands.lookup(sensor, match.group(1)) if match else None
        if count == len(bands) and 0 <= index < count:
            return bands[index]
        return None

    @staticmethod
    def band_name(spec: BandSpec) -> str:
        """Display name: id and description, e.g. "B8 Panchromatic" """
        return f"{spec[0]} {spec[1]}"
