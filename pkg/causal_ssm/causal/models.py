import dataclasses
from enum import StrEnum
from typing import Dict, List

import numpy as np
import pandas as pd

from causal_ssm.errors import ValidationError


class ModelArm(StrEnum):
    """
    Model used for the second stage.

    Attributes:
        MULTIVARIATE (str): Multivariate model with a stationary slope.
        NONSTATIONARY (str): Multivariate model with a random walk slope.
        UNIVARIATE (str): Every store fitted on its own.
    """

    MULTIVARIATE = "multivariate"
    NONSTATIONARY = "nonstationary"
    UNIVARIATE = "univariate"


@dataclasses.dataclass
class CausalConfig:
    """
    Configuration of the causal analysis.

    Attributes:
        k (int): Number of counterfactual datasets, at least 2.
        percentile (float): Upper percentile of the pairwise distances used as threshold.
        max_parallel (int): Chains run at the same time.
        arm (ModelArm): Model of the second stage.
        level (float): Coverage of the difference estimand interval.
    """

    k: int = 30
    percentile: float = 0.95
    max_parallel: int = 4
    arm: ModelArm = ModelArm.MULTIVARIATE
    level: float = 0.95

    def __post_init__(self) -> None:
        self.arm = ModelArm(self.arm)
        if self.k < 2:
            raise ValidationError(f"At least two counterfactual datasets are needed, got {self.k}")
        if not 0 < self.percentile <= 1:
            raise ValidationError(f"Percentile must lie in (0, 1], got {self.percentile}")
        if not 0 < self.level < 1:
            raise ValidationError(f"Interval level must lie in (0, 1), got {self.level}")
        if self.max_parallel < 1:
            raise ValidationError("At least one parallel chain is required")


@dataclasses.dataclass
class CounterfactualSet:
    """
    Datasets drawn from the posterior predictive of the causal period given the pre-period.

    Attributes:
        datasets (np.ndarray): Counterfactual observations, shape (k, n, P).
        draw_indices (np.ndarray): Posterior draw used by every dataset, shape (k,).
    """

    datasets: np.ndarray
    draw_indices: np.ndarray

    def __post_init__(self) -> None:
        if self.datasets.ndim != 3 or self.datasets.shape[0] < 2:
            raise ValidationError(f"Expected at least two datasets of shape (n, P), got {self.datasets.shape}")
        if self.draw_indices.shape != (self.datasets.shape[0],):
            raise ValidationError("Expected one draw index per dataset")

    @property
    def k(self) -> int:
        return int(self.datasets.shape[0])

    @property
    def horizon(self) -> int:
        return int(self.datasets.shape[2])


@dataclasses.dataclass
class DifferenceSummary:
    """
    Posterior summary of the temporal average effect (1 / m) sum_{t <= m} (Y_obs - Y_cf).

    Attributes:
        median (np.ndarray): Posterior median, shape (n, P), column m - 1 averages the first m horizons.
        lower (np.ndarray): Lower interval bound, shape (n, P).
        upper (np.ndarray): Upper interval bound, shape (n, P).
    """

    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def detected(self) -> np.ndarray:
        """
        Where the interval excludes zero.
        """

        return (self.lower > 0) | (self.upper < 0)


@dataclasses.dataclass
class CausalRow:
    """
    Result of one store at one horizon.

    Attributes:
        store_id (str): Test store.
        region (str): Region of the store.
        horizon (int): Number of causal periods m, from 1.
        timestamp (pd.Timestamp): Time of the m-th causal period.
        ks_distance (float): One-sided KS distance between the observed and counterfactual trend sums.
        threshold (float): Upper percentile of the pairwise counterfactual distances.
        significant (bool): Whether the distance exceeds the threshold.
        diff_median (float): Posterior median of the average difference over the first m periods.
        diff_lower (float): Lower interval bound of the average difference.
        diff_upper (float): Upper interval bound of the average difference.
    """

    store_id: str
    region: str
    horizon: int
    timestamp: pd.Timestamp
    ks_distance: float
    threshold: float
    significant: bool
    diff_median: float
    diff_lower: float
    diff_upper: float

    def __post_init__(self) -> None:
        if not 0 <= self.ks_distance <= 1 or not 0 <= self.threshold <= 1:
            raise ValidationError(f"Distances must lie in [0, 1] for store {self.store_id}")
        if self.significant != (self.ks_distance > self.threshold):
            raise ValidationError(f"Inconsistent significance flag for store {self.store_id}")


@dataclasses.dataclass
class CausalReport:
    """
    Causal analysis of every test store.

    Attributes:
        arm (ModelArm): Model of the second stage.
        k (int): Number of counterfactual datasets.
        percentile (float): Threshold percentile.
        rows (List[CausalRow]): One row per store and horizon.
        dropped_stores (List[str]): Stores left out because no control was selected.
        selected_controls (Dict[str, List[str]]): Controls kept by the selection, per store.
    """

    arm: ModelArm
    k: int
    percentile: float
    rows: List[CausalRow] = dataclasses.field(default_factory=list)
    dropped_stores: List[str] = dataclasses.field(default_factory=list)
    selected_controls: Dict[str, List[str]] = dataclasses.field(default_factory=dict)

    @property
    def store_ids(self) -> List[str]:
        return list(dict.fromkeys(row.store_id for row in self.rows))

    def to_frame(self) -> pd.DataFrame:
        columns = [field.name for field in dataclasses.fields(CausalRow)]
        return pd.DataFrame([dataclasses.asdict(row) for row in self.rows], columns=columns)

    def significant_counts(self) -> pd.DataFrame:
        """
        Number of significant stores per horizon.
        """

        frame = self.to_frame()
        if frame.empty:
            return pd.DataFrame(columns=["horizon", "timestamp", "n_significant", "n_stores"])
        grouped = frame.groupby(["horizon", "timestamp"], sort=True)
        counts = grouped.agg(n_significant=("significant", "sum"), n_stores=("store_id", "count")).reset_index()
        counts["n_significant"] = counts["n_significant"].astype(int)
        return counts

    def merge(self, other: "CausalReport") -> "CausalReport":
        return dataclasses.replace(
            self,
            rows=self.rows + other.rows,
            dropped_stores=self.dropped_stores + other.dropped_stores,
            selected_controls={**self.selected_controls, **other.selected_controls},
        )
