import dataclasses
from enum import StrEnum
from typing import List, Optional

import numpy as np

from causal_ssm.errors import ValidationError
from causal_ssm.graph.adjacency import complete_adjacency, validate_adjacency
from causal_ssm.linalg import check_psd, min_eigenvalue


class SlopeMode(StrEnum):
    """
    Dynamics of the slope component.

    Attributes:
        STATIONARY (str): Stationary VAR(1) around the long run level D.
        RANDOM_WALK (str): Random walk slope, no intercept.
    """

    STATIONARY = "stationary"
    RANDOM_WALK = "random_walk"


@dataclasses.dataclass
class StructuralSpec:
    """
    Shape of a multivariate structural time series model.

    Attributes:
        n_series (int): Number of series n.
        seasonal_period (int): Seasonal period S, at least 2.
        slope_mode (SlopeMode): Slope dynamics.
        adjacency (np.ndarray): Store graph constraining every precision matrix, shape (n, n).
        control_counts (List[int]): Number of controls p_i of every series.
    """

    n_series: int
    seasonal_period: int
    slope_mode: SlopeMode = SlopeMode.STATIONARY
    adjacency: np.ndarray = dataclasses.field(default_factory=lambda: np.ones((0, 0), dtype=int))
    control_counts: List[int] = dataclasses.field(default_factory=list)

    def __post_init__(self) -> None:
        self.slope_mode = SlopeMode(self.slope_mode)
        if self.n_series < 1:
            raise ValidationError(f"At least one series is required, got {self.n_series}")
        if self.seasonal_period < 2:
            raise ValidationError(f"Seasonal period must be at least 2, got {self.seasonal_period}")
        if np.asarray(self.adjacency).size == 0:
            self.adjacency = complete_adjacency(self.n_series)
        self.adjacency = validate_adjacency(self.adjacency)
        if self.adjacency.shape != (self.n_series, self.n_series):
            raise ValidationError(f"Adjacency has shape {self.adjacency.shape}, expected n = {self.n_series}")
        if not self.control_counts:
            self.control_counts = [0] * self.n_series
        if len(self.control_counts) != self.n_series or min(self.control_counts) < 0:
            raise ValidationError(f"Expected {self.n_series} non-negative control counts")

    @property
    def n_seasonal_blocks(self) -> int:
        return self.seasonal_period - 1

    @property
    def state_dim(self) -> int:
        """
        State dimension m = n (2 + S - 1).
        """

        return self.n_series * (self.seasonal_period + 1)

    @property
    def n_controls(self) -> int:
        return sum(self.control_counts)

    def block(self, index: int) -> slice:
        """
        State slice of block 0 (trend), 1 (slope), 2 (current season) and onwards (lagged seasons).
        """

        n = self.n_series
        return slice(index * n, (index + 1) * n)


@dataclasses.dataclass
class ComponentParams:
    """
    Parameters of the structural components.

    Attributes:
        sigma (np.ndarray): Observation noise covariance.
        sigma_u (np.ndarray): Trend noise covariance.
        sigma_v (np.ndarray): Slope noise covariance.
        sigma_w (np.ndarray): Seasonal noise covariance.
        phi (np.ndarray): Slope VAR(1) coefficient, ignored for a random walk slope.
        d (np.ndarray): Long run slope level, ignored for a random walk slope.
    """

    sigma: np.ndarray
    sigma_u: np.ndarray
    sigma_v: np.ndarray
    sigma_w: np.ndarray
    phi: np.ndarray
    d: np.ndarray

    def __post_init__(self) -> None:
        for field in dataclasses.fields(self):
            value = np.asarray(getattr(self, field.name), dtype=float)
            setattr(self, field.name, np.atleast_1d(value) if field.name == "d" else np.atleast_2d(value))

        n = self.d.size
        for name in ("sigma", "sigma_u", "sigma_v", "sigma_w", "phi"):
            if getattr(self, name).shape != (n, n):
                raise ValidationError(f"{name} has shape {getattr(self, name).shape}, expected {(n, n)}")
        for name in ("sigma", "sigma_u", "sigma_v", "sigma_w"):
            check_psd(name, getattr(self, name))

    @property
    def n_series(self) -> int:
        return int(self.d.size)

    @property
    def covariances(self) -> List[np.ndarray]:
        return [self.sigma, self.sigma_u, self.sigma_v, self.sigma_w]

    @staticmethod
    def scaled_identity(n: int, obs: float, state: float, phi: float = 0.0) -> "ComponentParams":
        """
        Diagonal parameters with a common observation and state noise variance.
        """

        return ComponentParams(
            sigma=obs * np.eye(n),
            sigma_u=state * np.eye(n),
            sigma_v=state * np.eye(n),
            sigma_w=state * np.eye(n),
            phi=phi * np.eye(n),
            d=np.zeros(n),
        )


@dataclasses.dataclass
class UnivariatePriors:
    """
    Conjugate priors of the univariate baseline model, computed from one series.

    Precisions follow Gamma(shape, rate) laws with rate proportional to the sample variance SS.

    Attributes:
        sample_variance (float): SS, the sample variance of the series.
        obs_shape (float): Shape of the observation precision prior.
        obs_rate (float): Rate of the observation precision prior.
        state_shape (float): Shape of the trend, slope and seasonal precision priors.
        state_rate (float): Rate of the trend, slope and seasonal precision priors.
        d_variance (float): Variance of the normal prior on d.
        phi_variance (float): Variance of the normal prior on phi, truncated to (-1, 1).
    """

    sample_variance: float
    obs_shape: float
    obs_rate: float
    state_shape: float
    state_rate: float
    d_variance: float = 0.01
    phi_variance: float = 0.01


@dataclasses.dataclass
class CovariancePriors:
    """
    G-Wishart priors of the four covariance matrices.

    The observation precision follows W_G(df, H), the trend, slope and seasonal precisions
    follow W_G(df, k^2 (n + 1) H) with their own multiplier k.

    Attributes:
        df (float): Degrees of freedom nu.
        scale (Optional[List[List[float]]]): Scale matrix H, the identity when omitted.
        k1 (float): Trend multiplier.
        k2 (float): Slope multiplier.
        k3 (float): Seasonal multiplier.
    """

    df: float = 1.0
    scale: Optional[List[List[float]]] = None
    k1: float = 0.1
    k2: float = 0.1
    k3: float = 0.1

    def __post_init__(self) -> None:
        if self.df <= 0:
            raise ValidationError(f"G-Wishart degrees of freedom must be positive, got {self.df}")
        if min(self.k1, self.k2, self.k3) <= 0:
            raise ValidationError("Scale multipliers k1, k2 and k3 must be positive")

    def scale_matrix(self, n: int) -> np.ndarray:
        if self.scale is None:
            return np.eye(n)
        scale = np.atleast_2d(np.asarray(self.scale, dtype=float))
        if scale.shape != (n, n):
            raise ValidationError(f"Prior scale has shape {scale.shape}, expected {(n, n)}")
        if min_eigenvalue(scale) <= 0:
            raise ValidationError("Prior scale must be positive definite")
        return scale

    def scales(self, n: int) -> List[np.ndarray]:
        """
        Prior scales of sigma, sigma_u, sigma_v and sigma_w, in that order.
        """

        scale = self.scale_matrix(n)
        return [scale] + [k**2 * (n + 1) * scale for k in (self.k1, self.k2, self.k3)]
