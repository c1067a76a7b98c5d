import datetime as dt
import json

import numpy as np
import pytest

from errors import NoTile, ParseError
from geo.raster import AOI
from catalog import (
    LOW_RES_SENSORS, MonthSlot, SceneRecord, TileIndexEntry, cloud_fraction_from_mask, load_manifest,
    load_planet_months, load_tile_index, month_key, pair_months, tiles_for_aoi, write_manifest, write_plan,
)

from conftest import make_band

WORLD = AOI(0.0, 0.0, 1000.0, 1000.0)


def record(scene_id, sensor="landsat8", date=dt.date(2019, 3, 10), cloud=0.1, footprint=WORLD, assets=None):
    return SceneRecord(scene_id, sensor, date, cloud, footprint, "040_034", assets or {})


def overlap_area(a, b):
    w = min(a.max_x, b.max_x) - max(a.min_x, b.min_x)
    h = min(a.max_y, b.max_y) - max(a.min_y, b.min_y)
    return w * h if w > 0 and h > 0 else None


def random_box(rng, span=1000.0):
    x0, x1 = np.sort(rng.uniform(0, span, 2))
    y0, y1 = np.sort(rng.uniform(0, span, 2))
    return AOI(float(x0), float(y0), float(x1) + 1.0, float(y1) + 1.0)


class TestTiles:
    def test_matches_brute_force(self, rng):
        index = [TileIndexEntry(f"T{i:02d}", random_box(rng)) for i in range(12)]
        for _ in range(1000):
            aoi = random_box(rng)
            hits = [(overlap_area(e.footprint, aoi), e.tile_index) for e in index]
            hits = [(area, tile) for area, tile in hits if area is not None]
            if not hits:
                with pytest.raises(NoTile):
                    tiles_for_aoi(aoi, index)
                continue
            expected = [tile for _, tile in sorted(hits, key=lambda h: (-h[0], h[1]))]
            assert tiles_for_aoi(aoi, index) == expected

    def test_straddling_aoi_returns_both(self):
        index = [TileIndexEntry("west", AOI(0, 0, 100, 100)), TileIndexEntry("east", AOI(100, 0, 200, 100))]
        assert tiles_for_aoi(AOI(90, 10, 130, 20), index) == ["east", "west"]
        assert tiles_for_aoi(AOI(10, 10, 20, 20), index) == ["west"]

    def test_no_tile(self):
        with pytest.raises(NoTile):
            tiles_for_aoi(AOI(500, 500, 600, 600), [TileIndexEntry("a", AOI(0, 0, 100, 100))])

    def test_empty_index(self):
        with pytest.raises(ValueError):
            tiles_for_aoi(WORLD, [])

    def test_load_tile_index(self, tmp_path):
        path = tmp_path / "tiles.json"
        path.write_text(json.dumps([
            {"tile_index": "11SKA", "footprint": {"min_x": 0, "min_y": 0, "max_x": 10, "max_y": 10}},
            {"tile_index": "bad"},
        ]))
        with pytest.raises(ParseError) as excinfo:
            load_tile_index(str(path))
        assert excinfo.value.index == 1


def best_by_hand(pool):
    lowest = min(r.cloud_fraction for r in pool)
    pool = [r for r in pool if r.cloud_fraction == lowest]
    latest = max(r.acquisition_date for r in pool)
    pool = [r for r in pool if r.acquisition_date == latest]
    return sorted(pool, key=lambda r: r.scene_id)[0]


class TestPairing:
    def test_matches_exhaustive_choice(self, rng):
        planet = [(f"planet_{m}", 2018 + m // 12, m % 12 + 1) for m in range(24)]
        candidates = []
        for m in range(24):
            year, month = 2018 + m // 12, m % 12 + 1
            for sensor in LOW_RES_SENSORS:
                for c in range(int(rng.integers(0, 5))):
                    candidates.append(record(
                        f"{sensor}_{m}_{c}", sensor, dt.date(year, month, int(rng.integers(1, 29))),
                        float(rng.choice([0.05, 0.1, 0.3, 0.6, 0.9])),
                    ))
        max_cloud = 0.5
        slots = pair_months(planet, candidates, max_cloud)
        assert [s.reference_scene_id for s in slots] == [p[0] for p in planet]
        for slot in slots:
            for sensor in LOW_RES_SENSORS:
                pool = [r for r in candidates if r.sensor == sensor and r.month == (slot.year, slot.month)
                        and r.cloud_fraction <= max_cloud]
                chosen = slot.chosen[sensor]
                if not pool:
                    assert chosen is None
                else:
                    assert chosen == best_by_hand(pool)

    def test_ties_prefer_latest_then_id(self):
        older = record("b_old", date=dt.date(2019, 3, 2), cloud=0.2)
        newer = record("z_new", date=dt.date(2019, 3, 20), cloud=0.2)
        twin = record("a_new", date=dt.date(2019, 3, 20), cloud=0.2)
        (slot,) = pair_months([("p", 2019, 3)], [older, newer], 1.0)
        assert slot.chosen["landsat8"].scene_id == "z_new"
        (slot,) = pair_months([("p", 2019, 3)], [older, newer, twin], 1.0)
        assert slot.chosen["landsat8"].scene_id == "a_new"

    def test_cloud_ceiling_leaves_slot_empty(self):
        (slot,) = pair_months([("p", 2019, 3)], [record("cloudy", cloud=0.8)], 0.5)
        assert slot.chosen == {"landsat8": None, "sentinel2": None}
        assert slot.to_dict() == {"planet": "p", "landsat8": None, "sentinel2": None, "assets": []}

    def test_ceiling_is_inclusive(self):
        (slot,) = pair_months([("p", 2019, 3)], [record("edge", cloud=0.5)], 0.5)
        assert slot.chosen["landsat8"].scene_id == "edge"

    def test_other_months_ignored(self):
        (slot,) = pair_months([("p", 2019, 4)], [record("march")], 1.0)
        assert slot.chosen["landsat8"] is None

    def test_aoi_filter(self):
        far = record("far", footprint=AOI(5000, 5000, 6000, 6000))
        near = record("near", cloud=0.4)
        (slot,) = pair_months([("p", 2019, 3)], [far, near], 1.0, aoi=AOI(10, 10, 20, 20))
        assert slot.chosen["landsat8"].scene_id == "near"

    def test_bad_ceiling(self):
        with pytest.raises(ValueError):
            pair_months([], [], 1.5)

    def test_write_plan(self, tmp_path):
        s2 = record("S2A_1", "sentinel2", cloud=0.0, assets={"B08": "s2/B08.tif", "B04": "s2/B04.tif"})
        slots = pair_months([("planet_2019_03", 2019, 3)], [s2], 0.3)
        path = write_plan(slots, str(tmp_path / "plan.json"))
        plan = json.loads(open(path).read())
        assert plan == {"2019-03": {"planet": "planet_2019_03", "landsat8": None, "sentinel2": "S2A_1",
                                    "assets": ["s2/B04.tif", "s2/B08.tif"]}}

    def test_duplicate_planet_month_rejected(self):
        with pytest.raises(ValueError, match="2019-03"):
            pair_months([("planet_a", 2019, 3), ("planet_b", 2019, 3)], [], 0.3)

    def test_write_plan_rejects_colliding_slots(self, tmp_path):
        slots = [MonthSlot(2019, 3, "planet_a"), MonthSlot(2019, 3, "planet_b")]
        with pytest.raises(ValueError):
            write_plan(slots, str(tmp_path / "plan.json"))
        assert not (tmp_path / "plan.json").exists()


class TestManifest:
    def test_round_trip(self, tmp_path):
        records = [record("L8_a", assets={"B4": "a/B4.tif"}), record("S2_b", "sentinel2", cloud=0.25)]
        path = write_manifest(records, str(tmp_path / "manifest.json"))
        loaded = load_manifest(path)
        assert loaded == records
        assert loaded[0].asset_paths == {"B4": "a/B4.tif"}

    def test_bad_cloud_fraction_reports_index(self, tmp_path):
        entries = [record("ok").to_dict(), dict(record("bad").to_dict(), cloud_fraction=1.5)]
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(entries))
        with pytest.raises(ParseError) as excinfo:
            load_manifest(str(path))
        assert excinfo.value.index == 1

    def test_missing_field(self, tmp_path):
        entry = record("x").to_dict()
        del entry["acquisition_date"]
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps([entry]))
        with pytest.raises(ParseError) as excinfo:
            load_manifest(str(path))
        assert excinfo.value.index == 0

    def test_empty_manifest(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("[]")
        assert load_manifest(str(path)) == []
        (slot,) = pair_months([("p", 2019, 3)], load_manifest(str(path)), 0.5)
        assert slot.chosen == {"landsat8": None, "sentinel2": None}

    def test_not_an_array(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text('{"scene_id": "x"}')
        with pytest.raises(ParseError):
            load_manifest(str(path))

    def test_invalid_json_line(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("[\n{\n")
        with pytest.raises(ParseError) as excinfo:
            load_manifest(str(path))
        assert excinfo.value.line is not None

    def test_unknown_sensor(self):
        with pytest.raises(ValueError):
            record("x", sensor="modis")


def test_planet_months(tmp_path):
    path = tmp_path / "planet.json"
    path.write_text(json.dumps([{"scene_id": "a", "month": "2019-02"}, {"scene_id": "b", "year": 2019, "month": 3}]))
    assert load_planet_months(str(path)) == [("a", 2019, 2), ("b", 2019, 3)]
    path.write_text(json.dumps([{"scene_id": "a", "month": "2019-13"}]))
    with pytest.raises(ParseError):
        load_planet_months(str(path))


def test_month_key():
    assert month_key(2019, 3) == "2019-03"
    with pytest.raises(ValueError):
        month_key(2019, 0)


def test_cloud_fraction_from_mask():
    mask = np.zeros((10, 10), dtype=np.uint8)
    mask[:, :3] = 1
    mask[0, 4] = 255
    band = make_band(mask, name="cloud_mask", origin=(0.0, 100.0), nodata=255.0)
    assert cloud_fraction_from_mask(band, AOI(0.0, 0.0, 50.0, 100.0)) == pytest.approx(30 / 49)
    assert cloud_fraction_from_mask(band, AOI(50.0, 0.0, 100.0, 100.0)) == 0.0


def test_cloud_fraction_all_nodata_is_cloudy():
    band = make_band(np.full((4, 4), 255, dtype=np.uint8), name="cloud_mask", origin=(0.0, 40.0), nodata=255.0)
    assert cloud_fraction_from_mask(band, AOI(0.0, 0.0, 40.0, 40.0)) == 1.0
