import dataclasses
from enum import StrEnum
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from causal_ssm.errors import ValidationError
from causal_ssm.graph.adjacency import validate_adjacency


class StoreRole(StrEnum):
    """
    Role of a store in the input panel.

    Attributes:
        TEST (str): Store exposed to the campaign.
        CONTROL (str): Store never exposed, used as a regressor.
    """

    TEST = "test"
    CONTROL = "control"


@dataclasses.dataclass
class TimeSeriesPanel:
    """
    Represents the test-store series, their control regressors and the causal period boundary.

    Attributes:
        store_ids (List[str]): Identifier of every test store, in row order.
        regions (List[str]): Region label of every test store.
        timestamps (pd.DatetimeIndex): Uniformly spaced, strictly increasing time stamps.
        observed (np.ndarray): Test-store observations, shape (n, T), NaN for missing entries.
        controls (List[np.ndarray]): Control series of every test store, shape (p_i, T) each.
        control_ids (List[List[str]]): Identifier of every control series, per test store.
        causal_start (int): Index of the first time in the causal period, the pre-period is [0, causal_start).
            Equal to T only for pre-period windows, which carry no causal period.
        adjacency (np.ndarray): Store graph, shape (n, n), symmetric with unit diagonal.
        coordinates (Optional[np.ndarray]): Store coordinates, shape (n, d), when known.
    """

    store_ids: List[str]
    regions: List[str]
    timestamps: pd.DatetimeIndex
    observed: np.ndarray
    controls: List[np.ndarray]
    control_ids: List[List[str]]
    causal_start: int
    adjacency: np.ndarray
    coordinates: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.observed = np.atleast_2d(np.asarray(self.observed, dtype=float))
        self.controls = [np.atleast_2d(np.asarray(block, dtype=float)) for block in self.controls]
        self.timestamps = pd.DatetimeIndex(self.timestamps)
        self.adjacency = validate_adjacency(self.adjacency)

        n, n_times = self.observed.shape
        if len(self.store_ids) != n or len(self.regions) != n:
            raise ValidationError(f"Expected {n} store ids and region labels")
        if len(self.controls) != n or len(self.control_ids) != n:
            raise ValidationError(f"Expected one control block per store, got {len(self.controls)}")
        for store, block, names in zip(self.store_ids, self.controls, self.control_ids):
            if block.shape != (len(names), n_times) and not (block.size == 0 and not names):
                raise ValidationError(f"Controls of store {store} have shape {block.shape}")
            if not np.all(np.isfinite(block)):
                raise ValidationError(f"Controls of store {store} contain missing values")
        if self.adjacency.shape != (n, n):
            raise ValidationError(f"Adjacency has shape {self.adjacency.shape}, expected {(n, n)}")
        if len(self.timestamps) != n_times:
            raise ValidationError(f"Expected {n_times} timestamps, got {len(self.timestamps)}")
        if n_times > 1:
            steps = np.diff(self.timestamps.asi8)
            if steps[0] <= 0 or not np.all(steps == steps[0]):
                raise ValidationError("Timestamps must be strictly increasing and uniformly spaced")
        if not 0 < self.causal_start <= n_times:
            raise ValidationError(f"Causal start {self.causal_start} outside of (0, {n_times}]")
        self.controls = [block.reshape(len(names), n_times) for block, names in zip(self.controls, self.control_ids)]

    @property
    def n_series(self) -> int:
        return int(self.observed.shape[0])

    @property
    def n_times(self) -> int:
        return int(self.observed.shape[1])

    @property
    def control_counts(self) -> List[int]:
        return [block.shape[0] for block in self.controls]

    @property
    def n_controls(self) -> int:
        return sum(self.control_counts)

    @property
    def horizon(self) -> int:
        """
        Length of the causal period.
        """

        return self.n_times - self.causal_start

    def split_beta(self, beta: np.ndarray) -> List[np.ndarray]:
        """
        Split a stacked coefficient vector into one block per store.
        """

        beta = np.asarray(beta, dtype=float).ravel()
        if beta.size != self.n_controls:
            raise ValidationError(f"Coefficient vector has length {beta.size}, expected {self.n_controls}")
        offsets = np.cumsum([0] + self.control_counts)
        return [beta[start:stop] for start, stop in zip(offsets[:-1], offsets[1:])]

    def regression_effect(self, beta: np.ndarray) -> np.ndarray:
        """
        The regression term X_t beta for every store and time, shape (n, T).
        """

        effects = [coefficients @ block for coefficients, block in zip(self.split_beta(beta), self.controls)]
        return np.stack(effects) if effects else np.zeros((0, self.n_times))

    def design(self, t: int) -> np.ndarray:
        """
        Block-diagonal design matrix X_t of shape (n, p).
        """

        design = np.zeros((self.n_series, self.n_controls))
        offset = 0
        for i, block in enumerate(self.controls):
            design[i, offset : offset + block.shape[0]] = block[:, t]
            offset += block.shape[0]
        return design

    def designs(self) -> np.ndarray:
        """
        All design matrices, shape (T, n, p).
        """

        if self.n_times == 0:
            return np.zeros((0, self.n_series, self.n_controls))
        return np.stack([self.design(t) for t in range(self.n_times)])

    def window(self, start: int, stop: int) -> "TimeSeriesPanel":
        """
        Restrict the panel to times [start, stop), the causal start is clipped into the window.
        """

        causal_start = min(max(self.causal_start - start, 1), stop - start)
        return dataclasses.replace(
            self,
            timestamps=self.timestamps[start:stop],
            observed=self.observed[:, start:stop],
            controls=[block[:, start:stop] for block in self.controls],
            causal_start=causal_start,
        )

    def pre_period(self) -> "TimeSeriesPanel":
        return self.window(0, self.causal_start)

    def subset(self, rows: Sequence[int]) -> "TimeSeriesPanel":
        """
        Keep only the given store rows, with the induced subgraph.
        """

        rows = list(rows)
        return dataclasses.replace(
            self,
            store_ids=[self.store_ids[i] for i in rows],
            regions=[self.regions[i] for i in rows],
            observed=self.observed[rows],
            controls=[self.controls[i] for i in rows],
            control_ids=[self.control_ids[i] for i in rows],
            adjacency=self.adjacency[np.ix_(rows, rows)],
            coordinates=None if self.coordinates is None else self.coordinates[rows],
        )

    def with_controls(self, keep: Sequence[np.ndarray]) -> "TimeSeriesPanel":
        """
        Keep, per store, only the controls flagged in the given boolean masks.
        """

        return dataclasses.replace(
            self,
            controls=[block[mask] for block, mask in zip(self.controls, keep)],
            control_ids=[
                [name for name, flag in zip(names, mask) if flag] for names, mask in zip(self.control_ids, keep)
            ],
        )

    def with_observed(self, observed: np.ndarray) -> "TimeSeriesPanel":
        return dataclasses.replace(self, observed=observed)


def region_rows(regions: Sequence[str]) -> Dict[str, List[int]]:
    """
    Row indices of every region, regions in order of first appearance.
    """

    rows: Dict[str, List[int]] = {}
    for index, region in enumerate(regions):
        rows.setdefault(region, []).append(index)
    return rows
