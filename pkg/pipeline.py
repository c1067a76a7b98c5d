"""
End-to-end pairwise alignment and stack processing

load -> working resolution -> tiepoints -> robust fit -> resample every
warp band through the model -> report
"""
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from config import Settings
from errors import (
    ConfigError, CrsMismatch, FailedAlignment, InsufficientPoints, CoregError, NoConsensus, NoOverlap,
    ParseError, RankDeficient,
)
from geo.raster import AOI, GeoRaster, RasterBand, clip, footprint
from geo.transform import AffineGeoTransform
from alignment.correction_model import model_document, save_model
from alignment.resample import (
    InterpolationMethod, default_method, resample_band_through_model, to_working_resolution,
    working_resolution,
)
from alignment.robust_fit import POLICIES, RansacConfig, RobustFitResult, fit_with_policy
from alignment.tiepoints import (
    MatchParams, TiePointSet, export_tiepoints, import_tiepoints, match_images,
)
from rasters import read_raster, write_raster

logger = logging.getLogger(__name__)

BUILTIN = "builtin"
RMSE_BEFORE_POLICY = "identity model on the final inlier set"

PathSpec = Union[str, List[str]]


@dataclass
class AlignmentJob:
    """Everything needed to align one warp image to one base image"""
    base_path: PathSpec
    warp_path: PathSpec
    output_dir: str = "output"
    aoi: Optional[AOI] = None
    model: str = "affine"
    interpolation: Optional[str] = None
    ransac: RansacConfig = field(default_factory=RansacConfig)
    tiepoints: str = BUILTIN
    match: MatchParams = field(default_factory=MatchParams)
    quadratic_min_inliers: int = 24
    name: str = ""
    aoi_name: str = ""
    sensor: str = ""
    output_format: str = "tif"

    def __post_init__(self):
        if self.model not in POLICIES:
            raise ConfigError(f"Unknown model policy {self.model!r}; expected one of {', '.join(POLICIES)}")
        if self.interpolation is not None:
            InterpolationMethod.parse(self.interpolation)
        if self.output_format not in ("tif", "json"):
            raise ConfigError(f"Unknown output format {self.output_format!r}; expected tif or json")

    @property
    def matcher(self) -> str:
        """Tiepoint source label used to group report columns"""
        if self.tiepoints == BUILTIN:
            return "FAST+NCC"
        return os.path.splitext(os.path.basename(self.tiepoints))[0]

    def label(self) -> str:
        if self.name:
            return self.name
        warp = self.warp_path if isinstance(self.warp_path, str) else self.warp_path[0]
        return os.path.splitext(os.path.basename(warp))[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.label(),
            "base": self.base_path,
            "warp": self.warp_path,
            "out": self.output_dir,
            "aoi": self.aoi.to_dict() if self.aoi else None,
            "model": self.model,
            "interp": self.interpolation,
            "ransac": self.ransac.to_dict(),
            "tiepoints": self.tiepoints,
            "match": self.match.to_dict(),
            "quadratic_min_inliers": self.quadratic_min_inliers,
            "aoi_name": self.aoi_name,
            "sensor": self.sensor,
            "output_format": self.output_format,
        }


@dataclass
class AlignmentResult:
    """Products of align_pair"""
    aligned: GeoRaster
    fit: RobustFitResult
    model_document: Dict[str, Any]
    tiepoints: TiePointSet
    outputs: Dict[str, List[str]] = field(default_factory=dict)


def _grid(band: RasterBand) -> Dict[str, Any]:
    return {"geotransform": list(band.transform.to_gdal()), "width": band.width, "height": band.height}


def _check_inputs(base: GeoRaster, warp: GeoRaster, aoi: Optional[AOI]) -> Tuple[GeoRaster, GeoRaster]:
    if base.crs_id != warp.crs_id:
        raise CrsMismatch(f"Base is in {base.crs_id or '<none>'}, warp is in {warp.crs_id or '<none>'}")
    if aoi is not None:
        return clip(base, aoi), clip(warp, aoi)
    if not footprint(base).intersects(footprint(warp)):
        raise NoOverlap(f"Footprints of {base.scene_id or 'base'} and {warp.scene_id or 'warp'} do not overlap")
    return base, warp


def _output_grid(base_ref: RasterBand, band: RasterBand) -> Tuple[AffineGeoTransform, int, int]:
    """Base reference grid re-sampled at the band's own GSD"""
    ratio = band.gsd / base_ref.gsd
    out_gt = base_ref.transform.scaled(ratio)
    width = max(1, int(math.floor(base_ref.width / ratio + 1e-9)))
    height = max(1, int(math.floor(base_ref.height / ratio + 1e-9)))
    return out_gt, width, height


def align_rasters(base: GeoRaster, warp: GeoRaster, job: AlignmentJob) -> AlignmentResult:
    """
    Align an in-memory warp raster to a base raster

    Args:
        base: reference scene
        warp: misaligned scene
        job: alignment settings (paths are not used here)

    Returns:
        AlignmentResult with the aligned raster, fit and model document
    """
    base, warp = _check_inputs(base, warp, job.aoi)

    wr = working_resolution(base, warp)
    base_ref = base.bands[base.reference_band()]
    warp_ref = warp.bands[warp.reference_band()]
    working_base = to_working_resolution(base_ref, wr, InterpolationMethod.AREA_AVERAGE)
    working_warp = to_working_resolution(warp_ref, wr, InterpolationMethod.AREA_AVERAGE)
    logger.info("Working resolution %.3f m: base '%s' %dx%d, warp '%s' %dx%d", wr.gsd_m,
                base_ref.meta.name, working_base.width, working_base.height,
                warp_ref.meta.name, working_warp.width, working_warp.height)

    if job.tiepoints == BUILTIN:
        tps = match_images(working_base, working_warp, job.match)
    else:
        tps = import_tiepoints(job.tiepoints)
        expected = ((working_base.width, working_base.height), (working_warp.width, working_warp.height))
        if (tps.base_size, tps.warp_size) != expected:
            logger.warning("Tiepoint grids %s/%s differ from working grids %s/%s", tps.base_size,
                           tps.warp_size, expected[0], expected[1])
    logger.info("%d tiepoints from %s", len(tps), tps.provenance)

    try:
        result = fit_with_policy(job.model, tps, job.ransac, job.quadratic_min_inliers)
    except (NoConsensus, InsufficientPoints, RankDeficient) as e:
        raise FailedAlignment(f"{job.label()}: {e}") from e
    model = result.model

    bands = []
    methods = {}
    for band in warp.bands:
        method = InterpolationMethod.parse(job.interpolation) if job.interpolation else default_method(band.meta)
        out_gt, width, height = _output_grid(base_ref, band)
        bands.append(resample_band_through_model(band, working_base.transform, working_warp.transform,
                                                 model, out_gt, width, height, method))
        methods[band.meta.name] = method.value

    metadata = {
        "policy": job.model,
        "model_kind": model.kind.value,
        "ransac": job.ransac.to_dict(),
        "seed": job.ransac.seed,
        "interpolation": methods,
        "tiepoint_source": tps.provenance,
        "tiepoint_count": len(tps),
        "match": job.match.to_dict() if job.tiepoints == BUILTIN else None,
        "iterations_used": result.iterations_used,
        "rmse_before_policy": RMSE_BEFORE_POLICY,
        "rmse_before": result.report.rmse_before,
        "rmse_after": result.report.rmse_after,
        "inliers": result.report.inlier_count,
        "base_scene": base.scene_id,
        "warp_scene": warp.scene_id,
    }
    document = model_document(model, wr.gsd_m, _grid(working_base), _grid(working_warp), metadata)

    tags = dict(warp.tags)
    tags.update({
        "alignment_model": model.kind.value,
        "alignment_seed": str(job.ransac.seed),
        "alignment_interpolation": json.dumps(methods),
        "alignment_base_scene": base.scene_id,
    })
    aligned = GeoRaster(bands=tuple(bands), crs_id=warp.crs_id, scene_id=warp.scene_id, tags=tags)
    return AlignmentResult(aligned=aligned, fit=result, model_document=document, tiepoints=tps)


def align_pair(job: AlignmentJob) -> AlignmentResult:
    """
    Read the job's rasters, align them and write every product

    Writes <name>_aligned.<tif|json>, <name>_model.json,
    <name>_report.json and <name>_tiepoints.txt into the output directory.
    """
    base = read_raster(job.base_path)
    warp = read_raster(job.warp_path)
    result = align_rasters(base, warp, job)

    os.makedirs(job.output_dir, exist_ok=True)
    stem = os.path.join(job.output_dir, job.label())
    outputs = {
        "aligned": write_raster(result.aligned, f"{stem}_aligned.{job.output_format}"),
        "model": [save_model(result.model_document, f"{stem}_model.json")],
    }
    tiepoint_path = f"{stem}_tiepoints.txt"
    export_tiepoints(result.tiepoints, tiepoint_path)
    outputs["tiepoints"] = [tiepoint_path]

    report_path = f"{stem}_report.json"
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump({
            "job": job.to_dict(),
            "fit": result.fit.to_dict(),
            "model": result.model_document,
        }, f, indent=2)
    outputs["report"] = [report_path]
    result.outputs = outputs
    logger.info("Aligned %s: %s rmse %.3f -> %.3f px (%d/%d inliers)", job.label(),
                result.fit.model.kind.value, result.fit.report.rmse_before, result.fit.report.rmse_after,
                result.fit.report.inlier_count, result.fit.report.total_count)
    return result


# ---------------------------------------------------------------------------
# Stacks
# ---------------------------------------------------------------------------

ROW_COLUMNS = ["job", "scene_id", "aoi", "sensor", "matcher", "model_kind",
               "rmse_before", "rmse_after", "inliers", "total", "error"]


@dataclass
class StackReport:
    """Per-image rows plus aggregate RMSE statistics over the successful rows"""
    rows: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def succeeded(self) -> List[Dict[str, Any]]:
        return [r for r in self.rows if not r.get("error")]

    @property
    def failed(self) -> List[Dict[str, Any]]:
        return [r for r in self.rows if r.get("error")]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=ROW_COLUMNS)

    def aggregates(self) -> Dict[str, Any]:
        """Mean and population standard deviation of before/after RMSE"""
        ok = self.to_frame()
        ok = ok[ok["error"].isna() | (ok["error"] == "")]
        stats: Dict[str, Any] = {"count": int(len(ok)), "failed": len(self.failed)}
        for column in ("rmse_before", "rmse_after"):
            values = ok[column].astype(float)
            stats[f"{column}_mean"] = float(values.mean()) if len(values) else float("nan")
            stats[f"{column}_std"] = float(values.std(ddof=0)) if len(values) else float("nan")
        return stats

    def to_dict(self) -> Dict[str, Any]:
        return {"rows": self.rows, "aggregates": self.aggregates()}

    def save(self, path: str) -> str:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
        return path

    @classmethod
    def load(cls, path: str) -> "StackReport":
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
        if not isinstance(document, dict) or "rows" not in document:
            raise ParseError(f"{path} is not a stack report")
        return cls(rows=list(document["rows"]))


def _row(job: AlignmentJob, result: Optional[AlignmentResult] = None, error: str = "") -> Dict[str, Any]:
    row = {
        "job": job.label(),
        "scene_id": "",
        "aoi": job.aoi_name,
        "sensor": job.sensor,
        "matcher": job.matcher,
        "model_kind": None,
        "rmse_before": None,
        "rmse_after": None,
        "inliers": None,
        "total": None,
        "error": error,
    }
    if result is not None:
        report = result.fit.report
        row.update({
            "scene_id": result.aligned.scene_id,
            "model_kind": result.fit.model.kind.value,
            "rmse_before": report.rmse_before,
            "rmse_after": report.rmse_after,
            "inliers": report.inlier_count,
            "total": report.total_count,
        })
    return row


def _run_job(job: AlignmentJob) -> Dict[str, Any]:
    try:
        return _row(job, align_pair(job))
    except FailedAlignment as e:
        logger.warning("Alignment failed for %s: %s", job.label(), e)
        return _row(job, error=f"FailedAlignment: {e}")
    except (CoregError, OSError, ValueError) as e:
        logger.error("Error processing %s: %s", job.label(), e)
        return _row(job, error=f"{type(e).__name__}: {e}")


def align_stack(jobs: Sequence[AlignmentJob], workers: int = 1) -> StackReport:
    """
    Run align_pair for every job; failures become error rows

    Args:
        jobs: alignment jobs (at least one)
        workers: parallel jobs

    Returns:
        StackReport with rows in job order
    """
    if not jobs:
        raise ValueError("align_stack needs at least one job")
    if workers <= 1:
        rows = [_run_job(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_job, jobs))
    report = StackReport(rows=rows)
    stats = report.aggregates()
    logger.info("Stack done: %d aligned, %d failed; after-RMSE %.3f +/- %.3f px", stats["count"],
                stats["failed"], stats["rmse_after_mean"], stats["rmse_after_std"])
    return report


# ---------------------------------------------------------------------------
# Job files
# ---------------------------------------------------------------------------

def _resolve(path: PathSpec, root: str) -> PathSpec:
    if isinstance(path, list):
        return [_resolve(p, root) for p in path]
    if path == BUILTIN or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(root, path))


def job_from_dict(entry: Dict[str, Any], settings: Optional[Settings] = None, root: str = ".") -> AlignmentJob:
    """Build a job from a job-file entry; missing values come from settings"""
    settings = settings or Settings()
    ransac = RansacConfig(
        inlier_threshold_px=float(entry.get("threshold", settings.ransac_threshold)),
        max_iterations=int(entry.get("max_iterations", settings.ransac_max_iterations)),
        confidence=float(entry.get("confidence", settings.ransac_confidence)),
        seed=int(entry.get("seed", settings.ransac_seed)),
        refit_rounds=int(entry.get("refit_rounds", settings.refit_rounds)),
    )
    match = MatchParams(
        max_corners=int(entry.get("max_corners", settings.max_corners)),
        fast_threshold=int(entry.get("fast_threshold", settings.fast_threshold)),
        patch_radius=int(entry.get("patch_radius", settings.patch_radius)),
        ratio=float(entry.get("match_ratio", settings.match_ratio)),
    )
    aoi = entry.get("aoi")
    return AlignmentJob(
        base_path=_resolve(entry["base"], root),
        warp_path=_resolve(entry["warp"], root),
        output_dir=_resolve(entry.get("out", settings.output_dir), root),
        aoi=AOI.from_dict(aoi) if aoi else None,
        model=str(entry.get("model", "affine")),
        interpolation=entry.get("interp"),
        ransac=ransac,
        tiepoints=_resolve(entry.get("tiepoints", BUILTIN), root),
        match=match,
        quadratic_min_inliers=int(entry.get("quadratic_min_inliers", settings.quadratic_min_inliers)),
        name=str(entry.get("name", "")),
        aoi_name=str(entry.get("aoi_name", "")),
        sensor=str(entry.get("sensor", "")),
        output_format=str(entry.get("output_format", "tif")),
    )


def load_jobs(path: str, settings: Optional[Settings] = None) -> List[AlignmentJob]:
    """
    Read a JSON job list

    Either an array of jobs, or {"defaults": {...}, "jobs": [...]} where each
    job is merged over the defaults. Relative paths are resolved against
    the job file's directory.
    """
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"Invalid JSON: {e.msg}", line=e.lineno) from e
    defaults: Dict[str, Any] = {}
    if isinstance(document, dict):
        defaults = document.get("defaults", {}) or {}
        document = document.get("jobs")
    if not isinstance(document, list):
        raise ParseError("Job file must hold a list of jobs")

    root = os.path.dirname(os.path.abspath(path))
    jobs = []
    for i, entry in enumerate(document):
        if not isinstance(entry, dict):
            raise ParseError("Job must be an object", index=i)
        merged = dict(defaults)
        merged.update(entry)
        try:
            jobs.append(job_from_dict(merged, settings, root))
        except ParseError as e:
            raise ParseError(str(e), index=i) from e
        except KeyError as e:
            raise ParseError(f"Missing field {e.args[0]!r}", index=i) from e
        except (TypeError, ValueError, CoregError) as e:
            raise ParseError(str(e), index=i) from e
    return jobs
