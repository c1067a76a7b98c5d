"""
Temporal pairing of low-resolution scenes with monthly high-resolution mosaics

Scenes come from local JSON manifests; cloud fractions are precomputed
metadata (or recomputed from a cloud-mask raster with
cloud_fraction_from_mask).
"""
import datetime as dt
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from errors import NoTile, ParseError
from geo.raster import AOI, GeoRaster, RasterBand, clip

logger = logging.getLogger(__name__)

LOW_RES_SENSORS = ("landsat8", "sentinel2")
SENSORS = LOW_RES_SENSORS + ("planet",)


def month_key(year: int, month: int) -> str:
    """Dataset folder name for a month: YYYY-MM"""
    if not 1 <= month <= 12:
        raise ValueError(f"Month out of range: {month}")
    return f"{year:04d}-{month:02d}"


@dataclass(frozen=True)
class SceneRecord:
    """One catalogued acquisition"""
    scene_id: str
    sensor: str
    acquisition_date: dt.date
    cloud_fraction: float
    footprint: AOI
    tile_index: str = ""
    asset_paths: Dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.sensor not in SENSORS:
            raise ValueError(f"Unknown sensor {self.sensor!r}; expected one of {', '.join(SENSORS)}")
        if not (math.isfinite(self.cloud_fraction) and 0.0 <= self.cloud_fraction <= 1.0):
            raise ValueError(f"cloud_fraction must be in [0, 1], got {self.cloud_fraction}")

    @property
    def month(self) -> Tuple[int, int]:
        return self.acquisition_date.year, self.acquisition_date.month

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scene_id": self.scene_id,
            "sensor": self.sensor,
            "acquisition_date": self.acquisition_date.isoformat(),
            "cloud_fraction": self.cloud_fraction,
            "footprint": self.footprint.to_dict(),
            "tile_index": self.tile_index,
            "asset_paths": dict(self.asset_paths),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SceneRecord":
        return cls(
            scene_id=str(d["scene_id"]),
            sensor=str(d["sensor"]).lower(),
            acquisition_date=dt.date.fromisoformat(str(d["acquisition_date"])),
            cloud_fraction=float(d["cloud_fraction"]),
            footprint=AOI.from_dict(d["footprint"]),
            tile_index=str(d.get("tile_index", "")),
            asset_paths={str(k): str(v) for k, v in (d.get("asset_paths") or {}).items()},
        )


@dataclass
class MonthSlot:
    """A Planet month and the low-resolution scene picked for each sensor"""
    year: int
    month: int
    reference_scene_id: str
    chosen: Dict[str, Optional[SceneRecord]] = field(
        default_factory=lambda: {sensor: None for sensor in LOW_RES_SENSORS}
    )

    @property
    def key(self) -> str:
        return month_key(self.year, self.month)

    def to_dict(self) -> Dict[str, Any]:
        entry: Dict[str, Any] = {"planet": self.reference_scene_id}
        assets: List[str] = []
        for sensor in LOW_RES_SENSORS:
            record = self.chosen.get(sensor)
            entry[sensor] = record.scene_id if record else None
            if record:
                assets.extend(record.asset_paths[band] for band in sorted(record.asset_paths))
        entry["assets"] = assets
        return entry


@dataclass(frozen=True)
class TileIndexEntry:
    """WRS2 path/row or MGRS tile approximated by its bounding rectangle"""
    tile_index: str
    footprint: AOI

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "TileIndexEntry":
        return cls(str(d["tile_index"]), AOI.from_dict(d["footprint"]))


def tiles_for_aoi(aoi: AOI, index: Sequence[TileIndexEntry]) -> List[str]:
    """
    Tiles whose footprint intersects the AOI

    Args:
        aoi: area of interest
        index: tile footprints

    Returns:
        Tile ids ordered by overlap area (largest first), then tile id
    """
    if not index:
        raise ValueError("Tile index is empty")
    hits = []
    for entry in index:
        overlap = entry.footprint.intersection(aoi)
        if overlap is not None:
            hits.append((-overlap.area, entry.tile_index))
    if not hits:
        raise NoTile(f"No tile intersects AOI {aoi.to_dict()}")
    return [tile for _, tile in sorted(hits)]


def _preference(record: SceneRecord) -> Tuple[float, int, str]:
    # Least cloud, then latest date, then scene id
    return record.cloud_fraction, -record.acquisition_date.toordinal(), record.scene_id


def pair_months(planet_stack: Sequence[Tuple[str, int, int]], candidates: Sequence[SceneRecord],
                max_cloud: float, aoi: Optional[AOI] = None) -> List[MonthSlot]:
    """
    Pick the least cloudy low-resolution scene per sensor for every Planet month

    Args:
        planet_stack: (scene_id, year, month) per Planet mosaic, in stack order
        candidates: low-resolution scene records
        max_cloud: cloud ceiling; a slot stays empty when nothing is at or under it
        aoi: when given, candidates must overlap it

    Returns:
        One MonthSlot per Planet mosaic, in the order given
    """
    if not 0.0 <= max_cloud <= 1.0:
        raise ValueError(f"max_cloud must be in [0, 1], got {max_cloud}")
    _check_unique_months((int(year), int(month)) for _, year, month in planet_stack)

    buckets: Dict[Tuple[str, int, int], List[SceneRecord]] = {}
    for record in candidates:
        if record.sensor not in LOW_RES_SENSORS or record.cloud_fraction > max_cloud:
            continue
        if aoi is not None and not record.footprint.intersects(aoi):
            continue
        buckets.setdefault((record.sensor,) + record.month, []).append(record)

    slots = []
    for scene_id, year, month in planet_stack:
        slot = MonthSlot(int(year), int(month), str(scene_id))
        for sensor in LOW_RES_SENSORS:
            pool = buckets.get((sensor, slot.year, slot.month))
            if pool:
                slot.chosen[sensor] = min(pool, key=_preference)
        slots.append(slot)

    filled = sum(1 for s in slots for r in s.chosen.values() if r is not None)
    logger.info("Paired %d months: %d of %d sensor slots filled", len(slots), filled,
                len(slots) * len(LOW_RES_SENSORS))
    return slots


def _check_unique_months(months: Iterable[Tuple[int, int]]) -> None:
    """Raise ValueError on the first repeated (year, month)"""
    seen = set()
    for year, month in months:
        if (year, month) in seen:
            raise ValueError(f"Planet month {year:04d}-{month:02d} appears more than once")
        seen.add((year, month))


def cloud_fraction_from_mask(mask_band: RasterBand, aoi: AOI, crs_id: str = "") -> float:
    """
    Cloudy share of the valid mask pixels over the AOI

    Non-zero mask values count as cloud; nodata pixels are ignored.
    """
    clipped = clip(GeoRaster(bands=(mask_band,), crs_id=crs_id), aoi).bands[0]
    data = clipped.data
    valid = np.isfinite(data) if data.dtype.kind == "f" else np.ones(data.shape, dtype=bool)
    if clipped.nodata is not None and not math.isnan(clipped.nodata):
        valid &= data != clipped.nodata
    total = int(valid.sum())
    if total == 0:
        return 1.0
    return float(np.count_nonzero(data[valid])) / total


def load_manifest(path: str) -> List[SceneRecord]:
    """Read a JSON array of scene records"""
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"Invalid JSON: {e.msg}", line=e.lineno) from e
    if not isinstance(document, list):
        raise ParseError("Manifest must be a JSON array of scene records")

    records = []
    for i, entry in enumerate(document):
        if not isinstance(entry, dict):
            raise ParseError("Scene record must be an object", index=i)
        try:
            records.append(SceneRecord.from_dict(entry))
        except KeyError as e:
            raise ParseError(f"Missing field {e.args[0]!r}", index=i) from e
        except (TypeError, ValueError) as e:
            raise ParseError(str(e), index=i) from e
    logger.debug("Loaded %d scene records from %s", len(records), path)
    return records


def write_manifest(records: Sequence[SceneRecord], path: str) -> str:
    with open(path, "w", encoding="utf-8") as f:
        json.dump([r.to_dict() for r in records], f, indent=2)
    return path


def write_plan(slots: Sequence[MonthSlot], path: str) -> str:
    """Write the YYYY-MM -> {planet, landsat8, sentinel2, assets} plan"""
    _check_unique_months((slot.year, slot.month) for slot in slots)
    plan = {slot.key: slot.to_dict() for slot in slots}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(plan, f, indent=2)
    return path


def load_tile_index(path: str) -> List[TileIndexEntry]:
    with open(path, "r", encoding="utf-8") as f:
        document = json.load(f)
    entries = []
    for i, entry in enumerate(document):
        try:
            entries.append(TileIndexEntry.from_dict(entry))
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"Bad tile entry: {e}", index=i) from e
    return entries


def load_planet_months(path: str) -> List[Tuple[str, int, int]]:
    """
    Read the Planet stack: a JSON array of {"scene_id", "month": "YYYY-MM"}
    (or "year"/"month" integers)
    """
    with open(path, "r", encoding="utf-8") as f:
        document = json.load(f)
    stack = []
    for i, entry in enumerate(document):
        try:
            if isinstance(entry.get("month"), str):
                year, month = (int(v) for v in entry["month"].split("-"))
            else:
                year, month = int(entry["year"]), int(entry["month"])
            month_key(year, month)
            stack.append((str(entry["scene_id"]), year, month))
        except (AttributeError, KeyError, TypeError, ValueError) as e:
            raise ParseError(f"Bad Planet month entry: {e}", index=i) from e
    return stack
