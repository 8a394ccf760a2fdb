"""
Persistence of causal reports and the summaries derived from them.
"""

import dataclasses
import json
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd

from causal_ssm.causal import CausalReport, CausalRow, ModelArm
from causal_ssm.errors import ValidationError
from causal_ssm.utils import EnhancedJSONEncoder, valid_semver, write_table

REPORT_FORMAT_VERSION = "1.0.0"

ROWS_FILE = "report.csv"

METADATA_FILE = "report.json"

COUNTS_FILE = "significant_counts.csv"

WEEKLY_FILE = "weekly_counts.csv"

PLOT_FILE = "plot_data.csv"

PathLike = Union[str, Path]


@dataclasses.dataclass
class ReportMetadata:
    """
    Everything a report holds besides its rows.

    Attributes:
        format_version (str): SemVer version of the report layout.
        arm (ModelArm): Model of the second stage.
        k (int): Number of counterfactual datasets.
        percentile (float): Threshold percentile.
        dropped_stores (List[str]): Stores left out of the analysis.
        selected_controls (Dict[str, List[str]]): Controls kept by the selection, per store.
    """

    format_version: str
    arm: ModelArm
    k: int
    percentile: float
    dropped_stores: List[str]
    selected_controls: Dict[str, List[str]]


def write_report(report: CausalReport, out_dir: PathLike) -> List[Path]:
    """
    Write the rows of a report as delimited text and the rest as JSON.

    Returns:
        List[Path]: Files written.
    """

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows_file, metadata_file = out_dir / ROWS_FILE, out_dir / METADATA_FILE
    write_table(report.to_frame(), rows_file)
    metadata = ReportMetadata(
        format_version=REPORT_FORMAT_VERSION,
        arm=report.arm,
        k=report.k,
        percentile=report.percentile,
        dropped_stores=report.dropped_stores,
        selected_controls=report.selected_controls,
    )
    with open(metadata_file, "w", encoding="utf-8", newline="\n") as output:
        output.write(json.dumps(metadata, indent=4, sort_keys=True, cls=EnhancedJSONEncoder))
    return [rows_file, metadata_file]


def _check_version(data: Dict[str, Any], file_name: Path) -> None:
    version = valid_semver(str(data.get("format_version", "")))
    if version is None:
        raise ValidationError(f"{file_name}: missing or invalid format version")
    expected = valid_semver(REPORT_FORMAT_VERSION)
    assert expected is not None
    if version.major != expected.major or version > expected:
        raise ValidationError(f"{file_name}: format version {version} is not readable, expected {expected.major}.x")


def read_report(out_dir: PathLike) -> CausalReport:
    """
    Read a report written by write_report.

    Raises:
        ValidationError: If a file is missing or its format version is not supported.
    """

    out_dir = Path(out_dir)
    rows_file, metadata_file = out_dir / ROWS_FILE, out_dir / METADATA_FILE
    try:
        with open(metadata_file, "r", encoding="utf-8") as metadata_input:
            data = json.load(metadata_input)
        frame = pd.read_csv(rows_file, dtype={"store_id": str, "region": str}, float_precision="round_trip")
    except (OSError, ValueError) as error:
        raise ValidationError(f"Unable to read report from {out_dir}: {error}") from error
    _check_version(data, metadata_file)

    rows = [
        CausalRow(
            store_id=record["store_id"],
            region=record["region"],
            horizon=int(record["horizon"]),
            timestamp=pd.Timestamp(record["timestamp"]),
            ks_distance=float(record["ks_distance"]),
            threshold=float(record["threshold"]),
            significant=bool(record["significant"]),
            diff_median=float(record["diff_median"]),
            diff_lower=float(record["diff_lower"]),
            diff_upper=float(record["diff_upper"]),
        )
        for record in frame.to_dict("records")
    ]
    return CausalReport(
        arm=ModelArm(data["arm"]),
        k=int(data["k"]),
        percentile=float(data["percentile"]),
        rows=rows,
        dropped_stores=list(data["dropped_stores"]),
        selected_controls={store: list(controls) for store, controls in data["selected_controls"].items()},
    )


def weekly_counts(report: CausalReport) -> pd.DataFrame:
    """
    Number of significant stores per week of the causal period.

    A store counts in a week when it is significant at the last horizon of that week. Weekly
    panels give one row per horizon.
    """

    frame = report.to_frame().sort_values(["store_id", "horizon"], kind="stable")
    if frame.empty:
        return pd.DataFrame(columns=["week", "week_start", "n_significant", "n_stores"])
    frame["week"] = (frame["horizon"] - 1) // _horizons_per_week(frame) + 1
    last = frame.groupby(["store_id", "week"], sort=True).tail(1)
    weekly = last.groupby("week", sort=True).agg(n_significant=("significant", "sum"), n_stores=("store_id", "count"))
    weekly.insert(0, "week_start", frame.groupby("week", sort=True)["timestamp"].min())
    weekly["n_significant"] = weekly["n_significant"].astype(int)
    return weekly.reset_index()


def _horizons_per_week(frame: pd.DataFrame) -> int:
    timestamps = pd.DatetimeIndex(sorted(frame["timestamp"].unique()))
    if len(timestamps) < 2:
        return 1
    step = timestamps[1] - timestamps[0]
    return max(1, int(pd.Timedelta(days=7) // step))


def plot_data(report: CausalReport) -> pd.DataFrame:
    """
    Per-store trajectories of both estimands, one row per store and horizon.
    """

    frame = report.to_frame().drop(columns="significant")
    return frame.sort_values(["store_id", "horizon"], kind="stable").reset_index(drop=True)


def render_report(report: CausalReport, out_dir: PathLike) -> List[Path]:
    """
    Write the per-horizon and weekly significance counts and the plot data of a report.

    Returns:
        List[Path]: Files written.
    """

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = {
        COUNTS_FILE: report.significant_counts(),
        WEEKLY_FILE: weekly_counts(report),
        PLOT_FILE: plot_data(report),
    }
    written = []
    for name, frame in tables.items():
        write_table(frame, out_dir / name)
        written.append(out_dir / name)
    return written
