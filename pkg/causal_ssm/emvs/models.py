import dataclasses
from enum import StrEnum
from typing import List

import numpy as np

from causal_ssm.errors import ValidationError
from causal_ssm.state_space.models import SmoothedMoments
from causal_ssm.structural.models import ComponentParams


def default_v0_grid() -> List[float]:
    return np.linspace(1e-6, 0.02, 20).tolist()


class EmvsVariant(StrEnum):
    """
    Model used by the selection stage.

    Attributes:
        STATIONARY (str): Structural model with a VAR(1) slope under a ridge prior.
        NONSTATIONARY (str): Structural model with a random walk slope and diffuse slope start.
        MISSPECIFIED (str): Independent regression errors, no latent states.
    """

    STATIONARY = "stationary"
    NONSTATIONARY = "nonstationary"
    MISSPECIFIED = "misspecified"


@dataclasses.dataclass
class SpikeSlabConfig:
    """
    Configuration of the spike-and-slab EM selection.

    Attributes:
        v0_grid (List[float]): Spike variances to scan, each in (0, v1).
        v1 (float): Slab variance.
        zeta1 (float): First Beta prior shape of theta.
        zeta2 (float): Second Beta prior shape of theta.
        temperature (float): Annealing exponent s in (0, 1], 1 disables tempering.
        max_iters (int): Maximum number of EM iterations per grid point.
        convergence_tol (float): Relative objective gain below which EM stops.
        phi_prior_variance (float): Variance of the Gaussian ridge prior on the slope coefficients.
        init_obs_variance (float): Starting observation noise variance.
        init_state_variance (float): Starting trend, slope and seasonal noise variance.
        init_variance (float): Diagonal of the first state covariance on trend, slope and season.
        warm_start (bool): Start every grid point from the previous solution.
        variant (EmvsVariant): Model used for selection.
    """

    v0_grid: List[float] = dataclasses.field(default_factory=default_v0_grid)
    v1: float = 10.0
    zeta1: float = 1.0
    zeta2: float = 1.0
    temperature: float = 0.1
    max_iters: int = 50
    convergence_tol: float = 1e-6
    phi_prior_variance: float = 0.1
    init_obs_variance: float = 0.1
    init_state_variance: float = 0.01
    init_variance: float = 1.0
    warm_start: bool = True
    variant: EmvsVariant = EmvsVariant.STATIONARY

    def __post_init__(self) -> None:
        self.variant = EmvsVariant(self.variant)
        self.v0_grid = [float(v0) for v0 in self.v0_grid]
        if not self.v0_grid:
            raise ValidationError("The spike variance grid is empty")
        if any(not 0 < v0 < self.v1 for v0 in self.v0_grid):
            raise ValidationError(f"Every spike variance must lie in (0, v1 = {self.v1})")
        if not 0 < self.temperature <= 1:
            raise ValidationError(f"Temperature must lie in (0, 1], got {self.temperature}")
        if self.max_iters < 1:
            raise ValidationError("At least one EM iteration is required")
        for name in ("convergence_tol", "phi_prior_variance", "init_obs_variance", "init_state_variance"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")


@dataclasses.dataclass
class EmvsState:
    """
    Iterate of the EM selection for one spike variance.

    Attributes:
        beta (np.ndarray): Regression coefficients, shape (p,).
        theta (float): Prior inclusion probability.
        phi (np.ndarray): Slope coefficient, shape (n, n).
        sigma (np.ndarray): Observation noise covariance.
        sigma_u (np.ndarray): Trend noise covariance.
        sigma_v (np.ndarray): Slope noise covariance.
        sigma_w (np.ndarray): Seasonal noise covariance.
        inclusion_weights (np.ndarray): Posterior inclusion probabilities w, shape (p,).
        precision_weights (np.ndarray): Expected prior precisions a*, shape (p,).
        v0 (float): Spike variance of the run.
        q_value (float): Objective value after the last M-step.
        q_trace (List[float]): Objective value after every iteration.
        iterations (int): Number of EM iterations run.
        converged (bool): Whether the relative gain dropped below the tolerance.
    """

    beta: np.ndarray
    theta: float
    phi: np.ndarray
    sigma: np.ndarray
    sigma_u: np.ndarray
    sigma_v: np.ndarray
    sigma_w: np.ndarray
    inclusion_weights: np.ndarray
    precision_weights: np.ndarray
    v0: float = 0.0
    q_value: float = -np.inf
    q_trace: List[float] = dataclasses.field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @staticmethod
    def initial(n: int, p: int, config: SpikeSlabConfig) -> "EmvsState":
        """
        Starting point with zero coefficients, theta = 0.5, zero slope coefficient and scaled identity covariances.
        """

        state = config.init_state_variance * np.eye(n)
        return EmvsState(
            beta=np.zeros(p),
            theta=0.5,
            phi=np.zeros((n, n)),
            sigma=config.init_obs_variance * np.eye(n),
            sigma_u=state.copy(),
            sigma_v=state.copy(),
            sigma_w=state.copy(),
            inclusion_weights=np.zeros(p),
            precision_weights=np.zeros(p),
        )

    def component_params(self) -> ComponentParams:
        return ComponentParams(
            sigma=self.sigma,
            sigma_u=self.sigma_u,
            sigma_v=self.sigma_v,
            sigma_w=self.sigma_w,
            phi=self.phi,
            d=np.zeros(self.sigma.shape[0]),
        )


@dataclasses.dataclass
class StateExpectations:
    """
    Conditional expectations of the E-step.

    Missing observations are integrated out: their rows of the completed data hold the
    conditional mean given the observed rows at the same time, with the state loading
    and residual covariance adjusted to match. Fully observed panels have completed data
    equal to the observations, loadings equal to z and zero extra covariance.

    Attributes:
        completed (np.ndarray): Completed observations, shape (n, T).
        loadings (np.ndarray): Per-time state loading J_t, shape (T, n, m).
        extra_covs (np.ndarray): Conditional covariance of the missing rows, shape (T, n, n).
        smoothed (SmoothedMoments): Smoothed state moments.
    """

    completed: np.ndarray
    loadings: np.ndarray
    extra_covs: np.ndarray
    smoothed: SmoothedMoments

    @property
    def expected_signal(self) -> np.ndarray:
        """
        E[J_t alpha_t], shape (n, T).
        """

        return np.einsum("tnm,tm->nt", self.loadings, self.smoothed.smoothed_means)


@dataclasses.dataclass
class PathRow:
    """
    One coefficient at one spike variance of the regularisation path.

    Attributes:
        v0 (float): Spike variance.
        index (int): Position of the coefficient in the stacked vector.
        store_id (str): Test store the control belongs to.
        control_id (str): Control identifier.
        beta (float): Estimated coefficient.
        weight (float): Posterior inclusion probability.
        theta (float): Estimated prior inclusion probability.
        threshold (float): Selection threshold at this spike variance.
        degenerate (bool): Whether the threshold formula had no valid solution.
    """

    v0: float
    index: int
    store_id: str
    control_id: str
    beta: float
    weight: float
    theta: float
    threshold: float
    degenerate: bool


@dataclasses.dataclass
class SelectionResult:
    """
    Coefficients retained by the selection stage.

    Attributes:
        beta (np.ndarray): Coefficients with sub-threshold entries set to zero, shape (p,).
        support (List[np.ndarray]): Boolean mask of the selected controls, per store.
        threshold (float): Threshold used.
        theta (float): Estimated prior inclusion probability.
        v0 (float): Spike variance the selection was read at.
        degenerate (bool): Whether the threshold formula had no valid solution.
        dropped_stores (List[str]): Stores left without any selected control.
    """

    beta: np.ndarray
    support: List[np.ndarray]
    threshold: float
    theta: float
    v0: float
    degenerate: bool = False
    dropped_stores: List[str] = dataclasses.field(default_factory=list)

    @property
    def n_selected(self) -> int:
        return int(sum(mask.sum() for mask in self.support))
