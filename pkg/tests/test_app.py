import datetime as dt
import json

import numpy as np
import pytest

from app import EXIT_ALIGNMENT_FAILED, EXIT_INPUT_ERROR, EXIT_OK, build_parser, main, parse_aoi
from catalog import SceneRecord, write_manifest
from geo.raster import AOI
from rasters import write_raster

from conftest import make_band, make_raster


@pytest.fixture(autouse=True)
def run_in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def synth_dir(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"width": 96, "height": 96, "seed": 2, "tiepoint_count": 150,
                                "true_model": {"kind": "shift", "a": [1.5], "b": [-0.5]}}))
    out = tmp_path / "synth"
    assert main(["synth", "--spec", str(spec), "--out", str(out)]) == EXIT_OK
    return out


def test_parse_aoi():
    assert parse_aoi("0,0,10,20") == AOI(0.0, 0.0, 10.0, 20.0)
    assert parse_aoi("0, 0, 10, 20, EPSG:32611").crs_id == "EPSG:32611"
    assert parse_aoi(None) is None
    with pytest.raises(ValueError):
        parse_aoi("1,2,3")


def test_synth_writes_pair(synth_dir):
    for name in ("base.tif", "warp.tif", "true_model.json", "tiepoints.txt", "jobs.json"):
        assert (synth_dir / name).exists()
    jobs = json.loads((synth_dir / "jobs.json").read_text())
    assert jobs["jobs"][0] == {"name": "synthetic-2", "base": "base.tif", "warp": "warp.tif"}
    assert jobs["defaults"]["model"] == "shift"


def test_align_command(synth_dir, tmp_path, capsys):
    out = tmp_path / "aligned"
    code = main(["align", "--base", str(synth_dir / "base.tif"), "--warp", str(synth_dir / "warp.tif"),
                 "--tiepoints", str(synth_dir / "tiepoints.txt"), "--model", "shift", "--out", str(out)])
    assert code == EXIT_OK
    assert "Successfully aligned: warp" in capsys.readouterr().out
    assert (out / "warp_aligned.tif").exists()
    assert (out / "warp_model.json").exists()


def test_stack_and_report(synth_dir, tmp_path, capsys):
    reports = tmp_path / "reports"
    assert main(["stack", "--jobs", str(synth_dir / "jobs.json"), "--out", str(reports)]) == EXIT_OK
    assert "[OK] synthetic-2" in capsys.readouterr().out
    assert (synth_dir / "aligned" / "synthetic-2_aligned.tif").exists()
    stack = reports / "stack_report.json"
    assert stack.exists() and (reports / "stack_report.csv").exists()

    assert main(["report", "--stack", str(stack)]) == EXIT_OK
    assert "FAST+NCC" in capsys.readouterr().out
    table = tmp_path / "table.csv"
    assert main(["report", "--stack", str(stack), "--format", "csv", "--out", str(table)]) == EXIT_OK
    assert table.exists()


def test_stack_with_failed_job(synth_dir, tmp_path, capsys):
    (synth_dir / "broken.tif").write_bytes(b"not a geotiff")
    jobs = json.loads((synth_dir / "jobs.json").read_text())
    jobs["jobs"].append({"name": "broken", "base": "base.tif", "warp": "broken.tif"})
    (synth_dir / "jobs.json").write_text(json.dumps(jobs))
    code = main(["stack", "--jobs", str(synth_dir / "jobs.json"), "--out", str(tmp_path / "r")])
    assert code == EXIT_ALIGNMENT_FAILED
    assert "[FAILED] broken" in capsys.readouterr().out


def test_featureless_pair_is_alignment_failure(tmp_path, texture):
    base = write_raster(make_raster(make_band(texture)), str(tmp_path / "base.tif"))
    warp = write_raster(make_raster(make_band(np.full((128, 128), 3.0))), str(tmp_path / "flat.tif"))
    code = main(["align", "--base", base[0], "--warp", warp[0], "--out", str(tmp_path / "out")])
    assert code == EXIT_ALIGNMENT_FAILED


def test_missing_input_is_input_error(tmp_path):
    code = main(["align", "--base", str(tmp_path / "nope.tif"), "--warp", str(tmp_path / "nope2.tif"),
                 "--out", str(tmp_path / "out")])
    assert code == EXIT_INPUT_ERROR
    assert main(["stack", "--jobs", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_INPUT_ERROR


def test_pair_command(tmp_path, capsys):
    footprint = AOI(0.0, 0.0, 100.0, 100.0)
    write_manifest([
        SceneRecord("L8_clear", "landsat8", dt.date(2019, 5, 4), 0.1, footprint),
        SceneRecord("L8_cloudy", "landsat8", dt.date(2019, 5, 20), 0.7, footprint),
    ], str(tmp_path / "manifest.json"))
    (tmp_path / "planet.json").write_text(json.dumps([{"scene_id": "planet_may", "month": "2019-05"}]))
    plan_path = tmp_path / "plan.json"
    code = main(["pair", "--manifest", str(tmp_path / "manifest.json"),
                 "--planet-months", str(tmp_path / "planet.json"), "--max-cloud", "0.5", "--out", str(plan_path)])
    assert code == EXIT_OK
    plan = json.loads(plan_path.read_text())
    assert plan["2019-05"]["landsat8"] == "L8_clear"
    assert plan["2019-05"]["sentinel2"] is None
    assert "2019-05  planet=planet_may" in capsys.readouterr().out


def test_bad_max_cloud_is_input_error(tmp_path):
    write_manifest([], str(tmp_path / "manifest.json"))
    (tmp_path / "planet.json").write_text("[]")
    code = main(["pair", "--manifest", str(tmp_path / "manifest.json"),
                 "--planet-months", str(tmp_path / "planet.json"), "--max-cloud", "2"])
    assert code == EXIT_INPUT_ERROR


def test_log_level_is_case_insensitive():
    args = build_parser().parse_args(["--log-level", "debug", "report", "--stack", "x.json"])
    assert args.log_level == "DEBUG"


def test_unknown_log_level_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--log-level", "LOUD", "report", "--stack", "x.json"])
    assert excinfo.value.code != 0
    assert "--log-level" in capsys.readouterr().err


def test_duplicate_planet_month_is_input_error(tmp_path):
    write_manifest([], str(tmp_path / "manifest.json"))
    (tmp_path / "planet.json").write_text(json.dumps([{"scene_id": "a", "month": "2019-05"},
                                                      {"scene_id": "b", "month": "2019-05"}]))
    code = main(["pair", "--manifest", str(tmp_path / "manifest.json"),
                 "--planet-months", str(tmp_path / "planet.json"), "--max-cloud", "0.5",
                 "--out", str(tmp_path / "plan.json")])
    assert code == EXIT_INPUT_ERROR
