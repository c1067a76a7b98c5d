"""
Generate test files for the multi-resolution co-registration tool
Creates synthetic base/warp pairs, tiepoint files, a scene manifest, a
Planet month list, a tile index and a stack job file
"""
import datetime as dt
import json
import os

import numpy as np

from alignment.correction_model import CorrectionModel, ModelKind, model_document, save_model
from alignment.tiepoints import export_tiepoints
from catalog import SceneRecord, month_key, write_manifest
from geo.raster import AOI
from rasters import write_raster
from synthetic import SyntheticSpec, generate_synthetic, synthesize_tiepoints

OUT = "test_data"

# Create test_data directory
os.makedirs(OUT, exist_ok=True)

print("Generating test files...")
print("=" * 60)

# ============================================================================
# 1. Synthetic pairs with known misalignment
# ============================================================================
print("\nCreating synthetic pairs...")

pairs = {
    "shift": CorrectionModel(ModelKind.SHIFT, (3.7,), (-1.2,)),
    "affine": CorrectionModel(ModelKind.AFFINE, (2.0, 1.002, 0.001), (-1.5, -0.001, 0.998)),
    "quadratic": CorrectionModel(ModelKind.QUADRATIC, (1.0, 1.0, 0.0, 2e-5, 0.0, 1e-5),
                                 (-0.5, 0.0, 1.0, 0.0, 1e-5, 2e-5)),
}

jobs = []
for i, (name, model) in enumerate(pairs.items()):
    spec = SyntheticSpec(width=256, height=256, seed=100 + i, true_model=model,
                         noise_sigma=0.3, outlier_fraction=0.3, resolution_ratio=2.0)
    base, warp, truth = generate_synthetic(spec)
    base_files = write_raster(base, os.path.join(OUT, f"{name}_base.tif"))
    warp_files = write_raster(warp, os.path.join(OUT, f"{name}_warp.tif"))
    w, h = spec.working_size
    grid = {"width": w, "height": h}
    save_model(model_document(truth, spec.working_gsd, grid, grid, {"synthetic": spec.to_dict()}),
               os.path.join(OUT, f"{name}_true_model.json"))
    export_tiepoints(synthesize_tiepoints(spec), os.path.join(OUT, f"{name}_tiepoints.txt"))
    jobs.append({"name": name, "base": os.path.basename(base_files[0]), "warp": os.path.basename(warp_files[0]),
                 "model": model.kind.value, "aoi_name": "synthetic", "sensor": "sentinel2"})
    jobs.append({"name": f"{name}_external", "base": os.path.basename(base_files[0]),
                 "warp": os.path.basename(warp_files[0]), "model": model.kind.value,
                 "tiepoints": f"{name}_tiepoints.txt", "aoi_name": "synthetic", "sensor": "sentinel2"})
    print(f"  [OK] {name:10} -> {', '.join(base_files + warp_files)}")

# A file that is not a raster, to show fault isolation in stacks
with open(os.path.join(OUT, "corrupt_warp.tif"), "wb") as f:
    f.write(b"not a geotiff")
jobs.append({"name": "corrupt", "base": "shift_base.tif", "warp": "corrupt_warp.tif",
             "aoi_name": "synthetic", "sensor": "landsat8"})

with open(os.path.join(OUT, "jobs.json"), "w", encoding="utf-8") as f:
    json.dump({"defaults": {"out": "../output", "threshold": 1.0, "seed": 0}, "jobs": jobs}, f, indent=2)
print(f"  [OK] jobs.json ({len(jobs)} jobs)")

# ============================================================================
# 2. Scene manifest: 24 months x 3 candidates per low-resolution sensor
# ============================================================================
print("\nCreating scene manifest...")

rng = np.random.default_rng(7)
aoi = AOI(500000.0, 4197440.0, 502560.0, 4200000.0, "EPSG:32611")
records = []
planet = []
for m in range(24):
    year, month = 2018 + m // 12, m % 12 + 1
    planet.append({"scene_id": f"planet_{month_key(year, month)}", "month": month_key(year, month)})
    for sensor, tile in (("landsat8", "040_034"), ("sentinel2", "11SKA")):
        for c in range(3):
            day = int(rng.integers(1, 29))
            scene_id = f"{sensor}_{year}{month:02d}{day:02d}_{c}"
            records.append(SceneRecord(
                scene_id=scene_id,
                sensor=sensor,
                acquisition_date=dt.date(year, month, day),
                cloud_fraction=round(float(rng.uniform(0, 1)), 3),
                footprint=AOI(aoi.min_x - 50000, aoi.min_y - 50000, aoi.max_x + 50000, aoi.max_y + 50000, aoi.crs_id),
                tile_index=tile,
                asset_paths={"B4": f"{scene_id}/B4.tif", "B8": f"{scene_id}/B8.tif"},
            ))

write_manifest(records, os.path.join(OUT, "manifest.json"))
with open(os.path.join(OUT, "planet_months.json"), "w", encoding="utf-8") as f:
    json.dump(planet, f, indent=2)
print(f"  [OK] manifest.json ({len(records)} records), planet_months.json ({len(planet)} months)")

# ============================================================================
# 3. Tile index
# ============================================================================
tiles = [
    {"tile_index": "040_034", "footprint": {"min_x": 400000, "min_y": 4100000, "max_x": 501000, "max_y": 4300000}},
    {"tile_index": "039_034", "footprint": {"min_x": 501000, "min_y": 4100000, "max_x": 600000, "max_y": 4300000}},
]
with open(os.path.join(OUT, "tile_index.json"), "w", encoding="utf-8") as f:
    json.dump(tiles, f, indent=2)
print("  [OK] tile_index.json")

print()
print("=" * 60)
print(f"Test files written to {OUT}/")
print("=" * 60)
