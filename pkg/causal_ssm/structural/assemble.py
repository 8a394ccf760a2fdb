from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from causal_ssm.errors import ValidationError
from causal_ssm.graph.adjacency import is_graph_feasible
from causal_ssm.linalg import min_eigenvalue
from causal_ssm.panel.models import TimeSeriesPanel
from causal_ssm.state_space.models import StateSpaceSystem
from causal_ssm.stationary.var import is_schur_stable
from causal_ssm.structural.models import ComponentParams, SlopeMode, StructuralSpec, UnivariatePriors

# Initial variance standing in for a diffuse slope.
DIFFUSE_VARIANCE = 1e6


def check_component_params(spec: StructuralSpec, params: ComponentParams) -> None:
    """
    Validate component parameters against the model shape and the store graph.

    Raises:
        ValidationError: On a dimension mismatch, an unstable slope or a precision off the graph.
    """

    if params.n_series != spec.n_series:
        raise ValidationError(f"Parameters are for {params.n_series} series, model has {spec.n_series}")
    if spec.slope_mode == SlopeMode.STATIONARY and not is_schur_stable(params.phi):
        raise ValidationError("Slope coefficient Phi is not Schur-stable")
    for name, covariance in zip(("sigma", "sigma_u", "sigma_v", "sigma_w"), params.covariances):
        if min_eigenvalue(covariance) <= 1e-10:
            continue
        if not is_graph_feasible(np.linalg.inv(covariance), spec.adjacency):
            raise ValidationError(f"Precision of {name} has non-zero entries off the store graph")


def initial_moments(
    spec: StructuralSpec, variance: float = 1.0, slope_variance: Optional[float] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Default N(a1, P1) of the first state.

    The mean is zero. P1 is diagonal with the given variance on the trend, slope and current
    season blocks, zero on the lagged seasons.

    Args:
        spec (StructuralSpec): The model shape.
        variance (float): Prior variance of the trend, slope and current season.
        slope_variance (Optional[float]): Slope variance override, defaults to 1e6 for a random walk slope.

    Returns:
        Tuple[np.ndarray, np.ndarray]: a1 and P1.
    """

    if slope_variance is None:
        slope_variance = DIFFUSE_VARIANCE if spec.slope_mode == SlopeMode.RANDOM_WALK else variance
    diagonal = np.zeros(spec.state_dim)
    diagonal[: 3 * spec.n_series] = variance
    diagonal[spec.block(1)] = slope_variance
    return np.zeros(spec.state_dim), np.diag(diagonal)


def assemble_system(
    spec: StructuralSpec,
    params: ComponentParams,
    init_mean: np.ndarray,
    init_cov: np.ndarray,
    validate: bool = True,
) -> StateSpaceSystem:
    """
    Build the state-space form of the structural model.

    The state stacks trend, slope, and the S - 1 most recent seasonal effects. The
    observation picks trend plus current season, the slope block evolves with Phi and
    intercept (I - Phi) D, or as a random walk.

    Args:
        spec (StructuralSpec): The model shape.
        params (ComponentParams): Component parameters.
        init_mean (np.ndarray): a1.
        init_cov (np.ndarray): P1.
        validate (bool): Check stability and graph feasibility of the parameters.

    Returns:
        StateSpaceSystem: The assembled system with Q = bdiag(sigma_u, sigma_v, sigma_w).
    """

    if validate:
        check_component_params(spec, params)
    n = spec.n_series
    m = spec.state_dim
    identity = np.eye(n)

    obs_matrix = np.zeros((n, m))
    obs_matrix[:, spec.block(0)] = identity
    obs_matrix[:, spec.block(2)] = identity

    transition = np.zeros((m, m))
    transition[spec.block(0), spec.block(0)] = identity
    transition[spec.block(0), spec.block(1)] = identity
    intercept = np.zeros(m)
    if spec.slope_mode == SlopeMode.STATIONARY:
        transition[spec.block(1), spec.block(1)] = params.phi
        intercept[spec.block(1)] = (identity - params.phi) @ params.d
    else:
        transition[spec.block(1), spec.block(1)] = identity
    for lag in range(spec.n_seasonal_blocks):
        transition[spec.block(2), spec.block(2 + lag)] = -identity
    for lag in range(1, spec.n_seasonal_blocks):
        transition[spec.block(2 + lag), spec.block(1 + lag)] = identity

    noise_selector = np.zeros((m, 3 * n))
    noise_selector[: 3 * n, :] = np.eye(3 * n)

    return StateSpaceSystem(
        obs_matrix=obs_matrix,
        state_intercept=intercept,
        transition=transition,
        noise_selector=noise_selector,
        obs_cov=params.sigma,
        state_cov=scipy.linalg.block_diag(params.sigma_u, params.sigma_v, params.sigma_w),
        init_mean=init_mean,
        init_cov=init_cov,
    )


def extract_components(spec: StructuralSpec, sys: StateSpaceSystem) -> ComponentParams:
    """
    Read the component parameters back from an assembled system.
    """

    n = spec.n_series
    if sys.n_states != spec.state_dim or sys.n_obs != n:
        raise ValidationError("System does not match the structural model shape")
    blocks = [sys.state_cov[i * n : (i + 1) * n, i * n : (i + 1) * n] for i in range(3)]
    if spec.slope_mode == SlopeMode.STATIONARY:
        phi = sys.transition[spec.block(1), spec.block(1)]
        d = np.linalg.solve(np.eye(n) - phi, sys.state_intercept[spec.block(1)])
    else:
        phi = np.eye(n)
        d = np.zeros(n)
    return ComponentParams(sigma=sys.obs_cov, sigma_u=blocks[0], sigma_v=blocks[1], sigma_w=blocks[2], phi=phi, d=d)


def apply_regression(panel: TimeSeriesPanel, beta: np.ndarray) -> np.ndarray:
    """
    Residualised observations Y_t - X_t beta, shape (n, T), missing entries stay missing.

    Raises:
        ValidationError: If beta does not have one entry per control.
    """

    return panel.observed - panel.regression_effect(beta)


def assemble_univariate(
    seasonal_period: int,
    slope_mode: SlopeMode,
    d: float,
    phi: float,
    sigma2: float,
    sigma2_u: float,
    sigma2_v: float,
    sigma2_w: float,
    init_mean: Optional[np.ndarray] = None,
    init_cov: Optional[np.ndarray] = None,
) -> StateSpaceSystem:
    """
    Scalar version of assemble_system for one series.
    """

    spec = StructuralSpec(n_series=1, seasonal_period=seasonal_period, slope_mode=slope_mode)
    params = ComponentParams(
        sigma=[[sigma2]], sigma_u=[[sigma2_u]], sigma_v=[[sigma2_v]], sigma_w=[[sigma2_w]], phi=[[phi]], d=[d]
    )
    if init_mean is None or init_cov is None:
        default_mean, default_cov = initial_moments(spec)
        init_mean = default_mean if init_mean is None else init_mean
        init_cov = default_cov if init_cov is None else init_cov
    return assemble_system(spec, params, init_mean, init_cov)


def univariate_priors(series: np.ndarray, obs_weight: float = 0.05, state_weight: float = 0.01) -> UnivariatePriors:
    """
    Gamma prior hyperparameters scaled by the sample variance of a series.

    Missing entries are ignored.

    Args:
        series (np.ndarray): One observed series.
        obs_weight (float): Shape of the observation precision prior, the rate is obs_weight * SS.
        state_weight (float): Shape of the state precision priors, the rate is state_weight * SS.

    Returns:
        UnivariatePriors: The prior hyperparameters.
    """

    values = np.asarray(series, dtype=float).ravel()
    values = values[~np.isnan(values)]
    if values.size < 2:
        raise ValidationError("At least two observed values are needed to scale the priors")
    sample_variance = float(np.var(values, ddof=1))
    if sample_variance <= 0.0:
        sample_variance = 1.0
    return UnivariatePriors(
        sample_variance=sample_variance,
        obs_shape=obs_weight,
        obs_rate=obs_weight * sample_variance,
        state_shape=state_weight,
        state_rate=state_weight * sample_variance,
    )
