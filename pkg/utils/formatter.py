"""
Report formatter for CSV and the RMSE summary table
"""
import math
from typing import Any, Dict, List, Sequence

import pandas as pd

STAT_COLUMNS = [
    ("rmse_before", "mean", "RMSE Before Avg"),
    ("rmse_before", "std", "RMSE Before Std Dev"),
    ("rmse_after", "mean", "RMSE After Avg"),
    ("rmse_after", "std", "RMSE After Std Dev"),
]


class ReportFormatter:
    """Format stack reports into various output formats"""

    @staticmethod
    def to_csv(rows: List[Dict[str, Any]], output_path: str) -> str:
        """Write report rows to CSV"""
        frame = pd.DataFrame(rows)
        frame.to_csv(output_path, index=False)
        return output_path

    @staticmethod
    def summary_frame(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
        """
        Avg / Std Dev of before and after RMSE per (aoi, sensor) and matcher

        Failed rows are left out; standard deviations are population
        (ddof=0) over the images of a group.
        """
        frame = pd.DataFrame(list(rows))
        if frame.empty:
            return pd.DataFrame()
        if "error" in frame:
            frame = frame[frame["error"].isna() | (frame["error"] == "")]
        if frame.empty:
            return pd.DataFrame()
        frame = frame.astype({"rmse_before": float, "rmse_after": float})
        grouped = frame.groupby(["aoi", "sensor", "matcher"], sort=True)
        summary = pd.DataFrame({
            label: grouped[column].agg(lambda s, how=how: s.mean() if how == "mean" else s.std(ddof=0))
            for column, how, label in STAT_COLUMNS
        })
        summary["Images"] = grouped.size()
        # One column group per matcher
        wide = summary.unstack("matcher")
        wide.columns = wide.columns.swaplevel(0, 1)
        return wide.sort_index(axis=1, level=0, sort_remaining=False)

    @staticmethod
    def render_table(rows: Sequence[Dict[str, Any]], precision: int = 3) -> str:
        """Text table with one row per (AOI, sensor) and one column group per matcher"""
        wide = ReportFormatter.summary_frame(rows)
        if wide.empty:
            return "No successful alignments to report"

        matchers = list(dict.fromkeys(wide.columns.get_level_values(0)))
        labels = [label for _, _, label in STAT_COLUMNS]
        header_top = ["AOI", "Sensor"]
        header = ["", ""]
        for matcher in matchers:
            header_top.extend([matcher] + [""] * (len(labels) - 1))
            header.extend(labels)

        body = []
        for (aoi, sensor), values in wide.iterrows():
            line = [str(aoi) or "-", str(sensor) or "-"]
            for matcher in matchers:
                for label in labels:
                    value = values.get((matcher, label), float("nan"))
                    line.append("-" if value is None or math.isnan(value) else f"{value:.{precision}f}")
            body.append(line)

        table = [header_top, header] + body
        widths = [max(len(row[i]) for row in table) for i in range(len(header))]
        lines = [" | ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in table]
        lines.insert(2, "-+-".join("-" * w for w in widths))
        return "\n".join(lines)

    @staticmethod
    def plan_table(plan: Dict[str, Dict[str, Any]]) -> str:
        """One line per month: planet id and the chosen low-resolution scenes"""
        lines = []
        for key in sorted(plan):
            entry = plan[key]
            lines.append(f"{key}  planet={entry.get('planet')}  landsat8={entry.get('landsat8') or '-'}"
                         f"  sentinel2={entry.get('sentinel2') or '-'}")
        return "\n".join(lines)
