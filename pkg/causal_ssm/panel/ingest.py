"""
Reading and writing store panels as long delimited text.

Every row holds one store at one time: store_id, role, region, timestamp, value. Missing
observations are empty value fields. The controls of a region are the candidate controls of
every test store in that region.
"""

from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from causal_ssm.errors import ValidationError
from causal_ssm.graph.adjacency import complete_adjacency
from causal_ssm.logger import Logger
from causal_ssm.panel.models import StoreRole, TimeSeriesPanel, region_rows
from causal_ssm.utils import write_table

LOG_ENTRY = "ingest"

COLUMNS = ["store_id", "role", "region", "timestamp", "value"]

MAX_REGION_SIZE = 15

PathLike = Union[str, Path]


def _line(index: int) -> int:
    # Line 1 is the header.
    return index + 2


def derive_graph(coordinates: np.ndarray, threshold: float) -> np.ndarray:
    """
    Connect every pair of stores closer than a distance threshold.

    Args:
        coordinates (np.ndarray): Store coordinates, shape (n, d).
        threshold (float): Largest distance of an edge, included.

    Returns:
        np.ndarray: Symmetric 0/1 adjacency with unit diagonal.
    """

    if threshold <= 0:
        raise ValidationError(f"Distance threshold must be positive, got {threshold}")
    coordinates = np.atleast_2d(np.asarray(coordinates, dtype=float))
    adjacency = (cdist(coordinates, coordinates) <= threshold).astype(int)
    np.fill_diagonal(adjacency, 1)
    return adjacency


def read_table(file_name: PathLike) -> pd.DataFrame:
    """
    Read a long panel file as text, every column kept as a string.
    """

    try:
        frame = pd.read_csv(file_name, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.ParserError as error:
        raise ValidationError(f"{file_name}: {error}") from error
    missing = [column for column in COLUMNS if column not in frame.columns]
    if missing:
        raise ValidationError(f"{file_name}: missing columns {missing}")
    return frame[COLUMNS]


def _parse_values(frame: pd.DataFrame) -> np.ndarray:
    values = np.full(len(frame), np.nan)
    for index, text in enumerate(frame["value"]):
        if not text.strip():
            continue
        try:
            values[index] = float(text)
        except ValueError as error:
            raise ValidationError(f"Line {_line(index)}: value {text!r} is not a number") from error
    return values


def _parse_rows(frame: pd.DataFrame) -> pd.DataFrame:
    for index, (store, role) in enumerate(zip(frame["store_id"], frame["role"])):
        if not store.strip():
            raise ValidationError(f"Line {_line(index)}: empty store id")
        if role not in list(StoreRole):
            raise ValidationError(f"Line {_line(index)}: unknown role {role!r}")

    timestamps = pd.to_datetime(frame["timestamp"], errors="coerce")
    bad = np.flatnonzero(timestamps.isna().to_numpy())
    if bad.size:
        raise ValidationError(f"Line {_line(int(bad[0]))}: invalid timestamp {frame['timestamp'].iloc[bad[0]]!r}")

    parsed = frame.assign(timestamp=timestamps, value=_parse_values(frame))
    duplicated = np.flatnonzero(parsed.duplicated(["store_id", "timestamp"]).to_numpy())
    if duplicated.size:
        raise ValidationError(f"Line {_line(int(duplicated[0]))}: duplicated store and timestamp")
    for column in ("role", "region"):
        labels = parsed.groupby("store_id", sort=False)[column].nunique()
        if (labels > 1).any():
            raise ValidationError(f"Store {labels[labels > 1].index[0]} has more than one {column}")
    return parsed


def _timeline(parsed: pd.DataFrame) -> pd.DatetimeIndex:
    timestamps = pd.DatetimeIndex(parsed["timestamp"].unique()).sort_values()
    if len(timestamps) < 2:
        raise ValidationError("At least two timestamps are required")
    steps = np.diff(timestamps.asi8)
    gaps = np.flatnonzero(steps != steps.min())
    if gaps.size:
        first = int(gaps[0])
        raise ValidationError(f"Gap in timestamps between {timestamps[first]} and {timestamps[first + 1]}")
    return timestamps


def read_coordinates(file_name: PathLike, store_ids: List[str]) -> np.ndarray:
    """
    Coordinates of the given stores, read from a file with a store_id column and one column per axis.
    """

    frame = pd.read_csv(file_name, dtype={"store_id": str}, float_precision="round_trip").set_index("store_id")
    absent = [store for store in store_ids if store not in frame.index]
    if absent:
        raise ValidationError(f"{file_name}: no coordinates for stores {absent}")
    try:
        return frame.loc[store_ids].to_numpy(dtype=float)
    except ValueError as error:
        raise ValidationError(f"{file_name}: coordinates must be numbers") from error


def _block_adjacency(
    regions: List[str],
    coordinates: Optional[np.ndarray],
    threshold: Optional[float],
    max_region_size: int,
) -> np.ndarray:
    n = len(regions)
    adjacency = np.zeros((n, n), dtype=int)
    for region, rows in region_rows(regions).items():
        if coordinates is None:
            block = complete_adjacency(len(rows))
        else:
            if len(rows) > max_region_size:
                raise ValidationError(
                    f"Region {region} has {len(rows)} stores, more than {max_region_size}. Use finer region labels"
                )
            assert threshold is not None
            block = derive_graph(coordinates[rows], threshold)
        adjacency[np.ix_(rows, rows)] = block
    return adjacency


def ingest_panel(
    data_file: PathLike,
    causal_start: str,
    coordinates_file: Optional[PathLike] = None,
    distance_threshold: Optional[float] = None,
    max_region_size: int = MAX_REGION_SIZE,
) -> TimeSeriesPanel:
    """
    Read a store panel from long delimited text.

    Stores in different regions are never connected. Within a region the graph is complete,
    or derived from the store coordinates when a coordinates file is given. Test stores
    without any control in their region are dropped.

    Args:
        data_file (PathLike): Panel file with the columns store_id, role, region, timestamp and value.
        causal_start (str): First timestamp of the causal period.
        coordinates_file (Optional[PathLike]): Store coordinates.
        distance_threshold (Optional[float]): Largest distance between connected stores, needed with coordinates.
        max_region_size (int): Largest region allowed when the graph is derived from coordinates.

    Returns:
        TimeSeriesPanel: Test stores in order of first appearance, each with every control of its region.

    Raises:
        ValidationError: On malformed rows, irregular timestamps, incomplete controls or when no store is left.
    """

    if coordinates_file is not None and distance_threshold is None:
        raise ValidationError("A distance threshold is required to derive the graph from coordinates")

    parsed = _parse_rows(read_table(data_file))
    timestamps = _timeline(parsed)
    start = int(timestamps.searchsorted(pd.Timestamp(causal_start)))
    if not 0 < start < len(timestamps):
        raise ValidationError(
            f"Causal start {causal_start} must fall strictly inside [{timestamps[0]}, {timestamps[-1]}]"
        )

    stores = parsed.drop_duplicates("store_id")
    wide = parsed.pivot(index="store_id", columns="timestamp", values="value").reindex(columns=timestamps)

    controls: Dict[str, List[str]] = {}
    for store, role, region in zip(stores["store_id"], stores["role"], stores["region"]):
        if role != StoreRole.CONTROL:
            continue
        missing = timestamps[wide.loc[store].isna().to_numpy()]
        if len(missing):
            raise ValidationError(f"Control {store} has no value at {missing[0]}")
        controls.setdefault(region, []).append(store)

    test_stores = stores[stores["role"] == StoreRole.TEST]
    kept = []
    for store, region in zip(test_stores["store_id"], test_stores["region"]):
        if region not in controls:
            Logger.warning(store, f"No candidate control in region {region}, store dropped")
            continue
        kept.append((store, region))
    if not kept:
        raise ValidationError(f"{data_file}: no test store with candidate controls")

    store_ids = [store for store, _ in kept]
    regions = [region for _, region in kept]
    coordinates = None if coordinates_file is None else read_coordinates(coordinates_file, store_ids)
    panel = TimeSeriesPanel(
        store_ids=store_ids,
        regions=regions,
        timestamps=timestamps,
        observed=wide.loc[store_ids].to_numpy(dtype=float),
        controls=[wide.loc[controls[region]].to_numpy(dtype=float) for region in regions],
        control_ids=[list(controls[region]) for region in regions],
        causal_start=start,
        adjacency=_block_adjacency(regions, coordinates, distance_threshold, max_region_size),
        coordinates=coordinates,
    )
    n_regions = len(region_rows(panel.regions))
    Logger.info(LOG_ENTRY, f"{panel.n_series} test stores in {n_regions} regions, {panel.n_times} times")
    return panel


def split_by_region(panel: TimeSeriesPanel) -> Dict[str, TimeSeriesPanel]:
    return {region: panel.subset(rows) for region, rows in region_rows(panel.regions).items()}


def panel_frame(panel: TimeSeriesPanel) -> pd.DataFrame:
    """
    Long representation of a panel, test stores first, then every distinct control of each region.
    """

    series = []
    for store, region, values in zip(panel.store_ids, panel.regions, panel.observed):
        series.append((store, StoreRole.TEST, region, values))
    seen = set()
    for region, names, block in zip(panel.regions, panel.control_ids, panel.controls):
        for name, values in zip(names, block):
            if (region, name) not in seen:
                seen.add((region, name))
                series.append((name, StoreRole.CONTROL, region, values))
    return pd.concat(
        [
            pd.DataFrame(
                {
                    "store_id": store,
                    "role": str(role),
                    "region": region,
                    "timestamp": panel.timestamps,
                    "value": values,
                }
            )
            for store, role, region, values in series
        ],
        ignore_index=True,
    )


def write_panel(panel: TimeSeriesPanel, file_name: PathLike, coordinates_file: Optional[PathLike] = None) -> None:
    """
    Write a panel in the format read by ingest_panel, with its store coordinates when known.
    """

    write_table(panel_frame(panel), file_name)
    if coordinates_file is not None and panel.coordinates is not None:
        axes = [f"x{axis}" for axis in range(panel.coordinates.shape[1])]
        coordinates = pd.DataFrame(panel.coordinates, columns=axes)
        coordinates.insert(0, "store_id", panel.store_ids)
        write_table(coordinates, coordinates_file)
