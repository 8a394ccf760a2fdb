import dataclasses
from typing import List, Optional

import numpy as np
import pandas as pd

from causal_ssm.errors import ValidationError
from causal_ssm.graph.adjacency import path_adjacency
from causal_ssm.panel.models import TimeSeriesPanel


def default_beta() -> List[float]:
    return [1.0, 2.0] + [0.0] * 8


@dataclasses.dataclass
class SimConfig:
    """
    Generator of spatially correlated test-store panels with injected impacts.

    Store i (from 1) receives the impact ((i - 1) / 2) log d on day d of the causal period.

    Attributes:
        n_series (int): Number of test stores, each one its own impact level.
        n_controls (int): Control series shared by every store.
        start (str): First day.
        end (str): Last day, included.
        impact_start (str): First day of the causal period.
        trend_coef (float): Autoregressive coefficient of the trend.
        trend_sd (float): Standard deviation of the trend innovations.
        trend_start (float): Trend value on the first day.
        seasonal_amplitude (float): Amplitude of both sinusoids of the seasonal component.
        seasonal_period (int): Period of the seasonal component.
        control_coef (float): Autoregressive coefficient of the controls.
        control_sd (float): Standard deviation of the control innovations.
        beta (List[float]): Coefficients of the controls, the same for every store.
        precision_diagonal (float): Diagonal of the observation noise precision.
        precision_off_diagonal (float): Precision entries between neighbouring stores.
        impact_step (float): Impact multiplier increment from one store to the next.
    """

    n_series: int = 5
    n_controls: int = 10
    start: str = "2016-01-01"
    end: str = "2016-04-09"
    impact_start: str = "2016-03-21"
    trend_coef: float = 0.8
    trend_sd: float = 0.1
    trend_start: float = 1.0
    seasonal_amplitude: float = 0.1
    seasonal_period: int = 7
    control_coef: float = 0.6
    control_sd: float = 1.0
    beta: List[float] = dataclasses.field(default_factory=default_beta)
    precision_diagonal: float = 10.0
    precision_off_diagonal: float = 5.0
    impact_step: float = 0.5

    def __post_init__(self) -> None:
        if self.n_series < 1 or self.n_controls < 1:
            raise ValidationError("At least one store and one control are required")
        if len(self.beta) != self.n_controls:
            raise ValidationError(f"Expected {self.n_controls} coefficients, got {len(self.beta)}")
        if not 0 < self.causal_start < self.n_times:
            raise ValidationError(
                f"Impact start {self.impact_start} must fall strictly inside [{self.start}, {self.end}]"
            )
        if abs(self.control_coef) >= 1:
            raise ValidationError("Control process must be stationary")
        if self.seasonal_period < 2:
            raise ValidationError("Seasonal period must be at least 2")
        if np.linalg.eigvalsh(self.precision)[0] <= 0:
            raise ValidationError("Noise precision must be positive definite")

    @property
    def timestamps(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, self.end, freq="D")

    @property
    def n_times(self) -> int:
        return len(self.timestamps)

    @property
    def causal_start(self) -> int:
        return int(self.timestamps.searchsorted(pd.Timestamp(self.impact_start)))

    @property
    def adjacency(self) -> np.ndarray:
        return path_adjacency(self.n_series)

    @property
    def precision(self) -> np.ndarray:
        precision = self.precision_off_diagonal * self.adjacency.astype(float)
        np.fill_diagonal(precision, self.precision_diagonal)
        return precision

    def impact_scales(self) -> np.ndarray:
        """
        Impact multiplier of every store, 0 for the first one.
        """

        return self.impact_step * np.arange(self.n_series)

    def impacts(self) -> np.ndarray:
        """
        Injected impact of every store and time, shape (n, T), zero before the causal period.
        """

        impact = np.zeros((self.n_series, self.n_times))
        days = np.arange(1, self.n_times - self.causal_start + 1)
        impact[:, self.causal_start :] = np.outer(self.impact_scales(), np.log(days))
        return impact

    def mean_impacts(self) -> np.ndarray:
        return self.impacts()[:, self.causal_start :].mean(axis=1)


@dataclasses.dataclass
class SimulatedPanel:
    """
    A generated panel and the components it was built from.

    Attributes:
        panel (TimeSeriesPanel): Observed test stores, shared controls and the causal period boundary.
        trend (np.ndarray): Trend component, shape (n, T).
        seasonal (np.ndarray): Seasonal component, shape (n, T).
        regression (np.ndarray): Regression term X_t beta, shape (n, T).
        noise (np.ndarray): Observation noise, shape (n, T).
        impact (np.ndarray): Injected impact, shape (n, T).
        seasonal_period (int): Period of the seasonal component.
        seed (Optional[int]): Seed of the generator.
    """

    panel: TimeSeriesPanel
    trend: np.ndarray
    seasonal: np.ndarray
    regression: np.ndarray
    noise: np.ndarray
    impact: np.ndarray
    seasonal_period: int
    seed: Optional[int]

    def components(self) -> pd.DataFrame:
        """
        Ground truth in long format, one row per store and time.
        """

        n, n_times = self.trend.shape
        return pd.DataFrame(
            {
                "store_id": np.repeat(self.panel.store_ids, n_times),
                "timestamp": np.tile(self.panel.timestamps, n),
                "observed": self.panel.observed.ravel(),
                "trend": self.trend.ravel(),
                "seasonal": self.seasonal.ravel(),
                "regression": self.regression.ravel(),
                "noise": self.noise.ravel(),
                "impact": self.impact.ravel(),
            }
        )
