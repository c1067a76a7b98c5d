"""
multi-resolution co-registration tool - command-line application
Co-registers low-resolution satellite images to a high-resolution base and
builds monthly pairing plans
"""
import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence, Tuple

from config import LOG_LEVELS, Settings, load_settings
from errors import FailedAlignment, CoregError, NoConsensus
from geo.raster import AOI
from alignment.correction_model import model_document, save_model
from alignment.robust_fit import POLICIES
from alignment.tiepoints import export_tiepoints
from catalog import load_manifest, load_planet_months, pair_months, write_plan
from pipeline import StackReport, align_pair, align_stack, job_from_dict, load_jobs
from rasters import write_raster
from synthetic import SyntheticSpec, generate_synthetic, synthesize_tiepoints
from utils.formatter import ReportFormatter
from utils.validator import FileValidator

logger = logging.getLogger("coreg")

EXIT_OK = 0
EXIT_ALIGNMENT_FAILED = 2
EXIT_INPUT_ERROR = 3


def parse_aoi(text: Optional[str]) -> Optional[AOI]:
    """'min_x,min_y,max_x,max_y[,crs]' -> AOI"""
    if not text:
        return None
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (4, 5):
        raise ValueError(f"AOI needs min_x,min_y,max_x,max_y[,crs], got {text!r}")
    crs = parts[4] if len(parts) == 5 else ""
    return AOI(*(float(p) for p in parts[:4]), crs_id=crs)


def _relative(paths, root: str):
    relative = [os.path.relpath(p, root) for p in paths]
    return relative[0] if len(relative) == 1 else relative


class CoregApp:
    """Main application class for the alignment tool"""

    def __init__(self, settings: Optional[Settings] = None, output_dir: Optional[str] = None):
        self.settings = settings or load_settings()
        self.output_dir = output_dir or self.settings.output_dir
        self._ensure_output_dir()
        self.formatter = ReportFormatter()
        self.validator = FileValidator()

    def _ensure_output_dir(self):
        """Ensure output directory exists"""
        os.makedirs(self.output_dir, exist_ok=True)

    def _check_document(self, path: str) -> None:
        is_valid, message = self.validator.validate_file(path, kind="document")
        if not is_valid:
            raise FileNotFoundError(message) if not os.path.exists(path) else ValueError(message)

    def process_align(self, args: argparse.Namespace) -> Tuple[str, int]:
        """Align one warp image to one base image"""
        entry = {
            "base": args.base if len(args.base) > 1 else args.base[0],
            "warp": args.warp if len(args.warp) > 1 else args.warp[0],
            "out": self.output_dir,
            "model": args.model,
            "tiepoints": args.tiepoints,
            "name": args.name or "",
            "output_format": args.format,
        }
        for key, value in (("interp", args.interp), ("threshold", args.threshold), ("seed", args.seed)):
            if value is not None:
                entry[key] = value
        aoi = parse_aoi(args.aoi)
        if aoi is not None:
            entry["aoi"] = aoi.to_dict()
        job = job_from_dict(entry, self.settings, root=os.getcwd())

        result = align_pair(job)
        report = result.fit.report
        written = [p for paths in result.outputs.values() for p in paths]
        status = (f"Successfully aligned: {job.label()}\n"
                  f"Model: {result.fit.model.kind.value}  inliers {report.inlier_count}/{report.total_count}\n"
                  f"RMSE before {report.rmse_before:.3f} px, after {report.rmse_after:.3f} px\n"
                  f"Output saved to:\n  " + "\n  ".join(written))
        return status, EXIT_OK

    def process_stack(self, args: argparse.Namespace) -> Tuple[str, int]:
        """Align every job in a job file and write the stack report"""
        self._check_document(args.jobs)
        jobs = load_jobs(args.jobs, self.settings)
        workers = args.workers or self.settings.workers
        report = align_stack(jobs, workers=workers)

        report_path = report.save(os.path.join(self.output_dir, args.report_name))
        self.formatter.to_csv(report.rows, os.path.splitext(report_path)[0] + ".csv")

        lines = []
        for row in report.rows:
            if row["error"]:
                lines.append(f"[FAILED] {row['job']}: {row['error']}")
            else:
                lines.append(f"[OK] {row['job']}: {row['rmse_before']:.3f} -> {row['rmse_after']:.3f} px")
        stats = report.aggregates()
        summary = "Stack Processing Complete\n\n"
        summary += f"Successful: {stats['count']}\n"
        summary += f"Failed: {stats['failed']}\n\n"
        summary += "Details:\n" + "\n".join(lines)
        summary += f"\n\nReport saved to: {report_path}"
        return summary, EXIT_OK if not report.failed else EXIT_ALIGNMENT_FAILED

    def process_pair(self, args: argparse.Namespace) -> Tuple[str, int]:
        """Build the YYYY-MM pairing plan from a local manifest"""
        self._check_document(args.manifest)
        self._check_document(args.planet_months)
        records = load_manifest(args.manifest)
        stack = load_planet_months(args.planet_months)
        slots = pair_months(stack, records, args.max_cloud, aoi=parse_aoi(args.aoi))
        out = args.out or os.path.join(self.output_dir, "plan.json")
        write_plan(slots, out)
        plan = {slot.key: slot.to_dict() for slot in slots}
        return f"{self.formatter.plan_table(plan)}\n\nPlan saved to: {out}", EXIT_OK

    def process_synth(self, args: argparse.Namespace) -> Tuple[str, int]:
        """Write a synthetic pair, its ground truth and a job file to align it"""
        spec = SyntheticSpec()
        if args.spec:
            self._check_document(args.spec)
            with open(args.spec, "r", encoding="utf-8") as f:
                spec = SyntheticSpec.from_dict(json.load(f))
        out = args.out or self.output_dir
        os.makedirs(out, exist_ok=True)

        base, warp, true_model = generate_synthetic(spec)
        base_files = write_raster(base, os.path.join(out, "base.tif"))
        warp_files = write_raster(warp, os.path.join(out, "warp.tif"))
        written = base_files + warp_files
        width, height = spec.working_size
        grid = {"width": width, "height": height}
        truth = model_document(true_model, spec.working_gsd, grid, grid, {"synthetic": spec.to_dict()})
        written.append(save_model(truth, os.path.join(out, "true_model.json")))
        tiepoint_path = os.path.join(out, "tiepoints.txt")
        export_tiepoints(synthesize_tiepoints(spec, true_model), tiepoint_path)
        written.append(tiepoint_path)

        job_path = os.path.join(out, "jobs.json")
        with open(job_path, "w", encoding="utf-8") as f:
            json.dump({"defaults": {"out": "aligned", "model": true_model.kind.value},
                       "jobs": [{"name": f"synthetic-{spec.seed}",
                                 "base": _relative(base_files, out), "warp": _relative(warp_files, out)}]},
                      f, indent=2)
        written.append(job_path)
        return "Synthetic pair written:\n  " + "\n  ".join(written), EXIT_OK

    def process_report(self, args: argparse.Namespace) -> Tuple[str, int]:
        """Render a saved stack report as the RMSE summary table or CSV"""
        self._check_document(args.stack)
        report = StackReport.load(args.stack)
        if args.format == "csv":
            out = args.out or os.path.splitext(args.stack)[0] + "_table.csv"
            self.formatter.summary_frame(report.rows).to_csv(out)
            return f"Table saved to: {out}", EXIT_OK
        table = self.formatter.render_table(report.rows)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as f:
                f.write(table + "\n")
        return table, EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coreg", description="Multi-resolution satellite image alignment")
    parser.add_argument("--log-level", default=None, type=str.upper, choices=LOG_LEVELS,
                        help="Logging level (COREG_LOG_LEVEL)")
    parser.add_argument("--output-dir", default=None, help="Directory for outputs (COREG_OUTPUT_DIR)")
    sub = parser.add_subparsers(dest="command", required=True)

    align = sub.add_parser("align", help="Align one warp image to a base image")
    align.add_argument("--base", nargs="+", required=True, help="Base raster (or its band files)")
    align.add_argument("--warp", nargs="+", required=True, help="Warp raster (or its band files)")
    align.add_argument("--aoi", help="min_x,min_y,max_x,max_y[,crs]")
    align.add_argument("--model", choices=POLICIES, default="affine")
    align.add_argument("--interp", choices=["nearest", "bilinear", "area_average"])
    align.add_argument("--tiepoints", default="builtin", help="Tiepoint file or 'builtin'")
    align.add_argument("--threshold", type=float, help="RANSAC inlier threshold in working pixels")
    align.add_argument("--seed", type=int, help="RANSAC seed")
    align.add_argument("--out", help="Output directory")
    align.add_argument("--name", help="Output file stem")
    align.add_argument("--format", choices=["tif", "json"], default="tif")

    stack = sub.add_parser("stack", help="Align every job of a job file")
    stack.add_argument("--jobs", required=True)
    stack.add_argument("--workers", type=int)
    stack.add_argument("--out", help="Output directory for the stack report")
    stack.add_argument("--report-name", default="stack_report.json")

    pair = sub.add_parser("pair", help="Pair Planet months with the least cloudy scenes")
    pair.add_argument("--manifest", required=True)
    pair.add_argument("--planet-months", required=True)
    pair.add_argument("--max-cloud", type=float, required=True)
    pair.add_argument("--aoi", help="min_x,min_y,max_x,max_y[,crs]")
    pair.add_argument("--out")

    synth = sub.add_parser("synth", help="Write a synthetic pair with known misalignment")
    synth.add_argument("--spec")
    synth.add_argument("--out")

    report = sub.add_parser("report", help="Render a stack report as an RMSE table")
    report.add_argument("--stack", required=True, help="stack_report.json written by 'stack'")
    report.add_argument("--format", choices=["text", "csv"], default="text")
    report.add_argument("--out")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI; returns the process exit code"""
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings()
    except CoregError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    logging.basicConfig(
        level=args.log_level or settings.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    output_dir = args.output_dir
    if args.command in ("align", "stack") and args.out:
        output_dir = args.out
    app = CoregApp(settings, output_dir=output_dir)
    handlers = {
        "align": app.process_align,
        "stack": app.process_stack,
        "pair": app.process_pair,
        "synth": app.process_synth,
        "report": app.process_report,
    }

    try:
        status, code = handlers[args.command](args)
    except (FailedAlignment, NoConsensus) as e:
        logger.error("Alignment failed: %s", e)
        return EXIT_ALIGNMENT_FAILED
    except (CoregError, OSError, ValueError, KeyError) as e:
        logger.error("Error processing %s: %s", args.command, e)
        return EXIT_INPUT_ERROR

    print(status)
    return code


if __name__ == "__main__":
    sys.exit(main())
