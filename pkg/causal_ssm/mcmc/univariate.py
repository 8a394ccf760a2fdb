"""
Baseline sampler fitting every store on its own with conjugate priors.
"""

from typing import List, Optional

import numpy as np
from scipy.stats import truncnorm

from causal_ssm.errors import CausalSsmError, ValidationError
from causal_ssm.logger import Logger
from causal_ssm.mcmc.models import McmcConfig, PosteriorDraws
from causal_ssm.mcmc.sampler import impute_missing, sample_d, sample_states
from causal_ssm.panel.models import TimeSeriesPanel
from causal_ssm.structural import (
    SlopeMode,
    StructuralSpec,
    UnivariatePriors,
    apply_regression,
    assemble_univariate,
    initial_moments,
    univariate_priors,
)
from causal_ssm.utils import spawn_generators

LOG_ENTRY = "univariate"

# Keeps phi strictly inside the stationary region.
PHI_BOUND = 1.0 - 1e-8


def _inverse_gamma(shape: float, rate: float, rng: np.random.Generator) -> float:
    return float(1.0 / rng.gamma(shape, 1.0 / rate))


def sample_phi_truncated(
    slope: np.ndarray, d: float, sigma2_v: float, rng: np.random.Generator, prior_variance: float
) -> float:
    """
    Draw phi from its normal conditional truncated to (-1, 1).
    """

    centred = slope - d
    precision = 1.0 / prior_variance + float(centred[:-1] @ centred[:-1]) / sigma2_v
    mean = float(centred[:-1] @ centred[1:]) / sigma2_v / precision
    scale = 1.0 / np.sqrt(precision)
    draw = truncnorm.rvs((-1.0 - mean) / scale, (1.0 - mean) / scale, loc=mean, scale=scale, random_state=rng)
    return float(np.clip(draw, -PHI_BOUND, PHI_BOUND))


def run_univariate_chain(
    series: np.ndarray,
    seasonal_period: int,
    slope_mode: SlopeMode,
    priors: UnivariatePriors,
    config: McmcConfig,
    rng: np.random.Generator,
    trend_start: Optional[int] = None,
    log_entry: str = LOG_ENTRY,
) -> PosteriorDraws:
    """
    Gibbs sampler of the univariate structural model.

    Precisions get Gamma conditionals, phi a truncated normal one and d a normal one.

    Args:
        series (np.ndarray): Residualised series y - x beta, shape (T,), NaN for missing entries.
        seasonal_period (int): Seasonal period S.
        slope_mode (SlopeMode): Slope dynamics.
        priors (UnivariatePriors): Conjugate prior hyperparameters.
        config (McmcConfig): Sweep counts and the first state variance.
        rng (np.random.Generator): Random generator.
        trend_start (Optional[int]): First time whose trend draws are kept.
        log_entry (str): Log entry of the chain.

    Returns:
        PosteriorDraws: Draws of a one-series model.
    """

    data = np.asarray(series, dtype=float).reshape(1, -1)
    n_times = data.shape[1]
    spec = StructuralSpec(n_series=1, seasonal_period=seasonal_period, slope_mode=slope_mode)
    init_mean, init_cov = initial_moments(spec, variance=config.init_variance)
    stationary = slope_mode == SlopeMode.STATIONARY
    trend_start = n_times if trend_start is None else trend_start

    values = np.array([0.1, 0.01, 0.01, 0.01])
    phi, d = (0.0, 0.0) if stationary else (1.0, 0.0)
    kept = config.n_kept
    records = np.zeros((kept, 6))
    final_states = np.zeros((kept, spec.state_dim))
    trends = np.zeros((kept, n_times - trend_start, 1))
    state_sum = np.zeros((n_times, spec.state_dim))
    slot = 0

    for iteration in range(config.n_iters):
        try:
            sys = assemble_univariate(seasonal_period, slope_mode, d, phi, *values, init_mean, init_cov)
            states = sample_states(sys, data, rng)
            signal = sys.obs_matrix @ states.T
            residuals = (impute_missing(data, signal, sys.obs_cov, rng) - signal)[0]
            values[0] = _inverse_gamma(priors.obs_shape + n_times / 2, priors.obs_rate + residuals @ residuals / 2, rng)

            if stationary:
                slope = states[:, 1]
                phi = sample_phi_truncated(slope, d, values[2], rng, priors.phi_variance)
                d = float(sample_d(slope[:, None], np.array([[phi]]), values[2:3, None], rng, priors.d_variance)[0])

            sys = assemble_univariate(seasonal_period, slope_mode, d, phi, *values, init_mean, init_cov)
            noise = states[1:] - sys.state_intercept - states[:-1] @ sys.transition.T
            for block in range(3):
                scatter = float(noise[:, block] @ noise[:, block])
                values[block + 1] = _inverse_gamma(
                    priors.state_shape + (n_times - 1) / 2, priors.state_rate + scatter / 2, rng
                )
        except CausalSsmError as error:
            message = f"Sweep {iteration}: {error}"
            Logger.error(log_entry, message)
            raise type(error)(message) from error

        if iteration < config.n_burnin or (iteration - config.n_burnin) % config.thinning:
            continue
        records[slot] = [phi, d, *values]
        final_states[slot] = states[-1]
        trends[slot, :, 0] = states[trend_start:, 0]
        state_sum += states
        slot += 1

    return PosteriorDraws(
        spec=spec,
        beta=np.zeros(0),
        phi=records[:, 0].reshape(-1, 1, 1),
        d=records[:, 1:2],
        sigma=records[:, 2].reshape(-1, 1, 1),
        sigma_u=records[:, 3].reshape(-1, 1, 1),
        sigma_v=records[:, 4].reshape(-1, 1, 1),
        sigma_w=records[:, 5].reshape(-1, 1, 1),
        reflect=np.zeros(kept, dtype=int),
        final_states=final_states,
        state_mean=state_sum / kept,
        trends=trends,
        trend_start=trend_start,
    )


def _interleave(blocks: List[np.ndarray], n_blocks: int) -> np.ndarray:
    # Per-store layouts (..., S + 1) into the stacked layout (..., n (S + 1)), block major.
    stacked = np.stack(blocks, axis=-1)
    return stacked.reshape(*stacked.shape[:-2], n_blocks * len(blocks))


def combine_univariate(fits: List[PosteriorDraws], spec: StructuralSpec, beta: np.ndarray) -> PosteriorDraws:
    """
    Stack independent one-series fits into the multivariate layout with diagonal matrices.

    Raises:
        ValidationError: If the fits disagree on the number of draws or the stored horizon.
    """

    if len(fits) != spec.n_series:
        raise ValidationError(f"Expected {spec.n_series} fits, got {len(fits)}")
    if len({fit.n_draws for fit in fits}) != 1 or len({fit.trend_start for fit in fits}) != 1:
        raise ValidationError("Univariate fits must share draw counts and trend start")

    def diagonal(name: str) -> np.ndarray:
        values = np.stack([getattr(fit, name)[:, 0, 0] for fit in fits], axis=1)
        return np.einsum("ki,ij->kij", values, np.eye(len(fits)))

    n_blocks = spec.seasonal_period + 1
    return PosteriorDraws(
        spec=spec,
        beta=np.asarray(beta, dtype=float),
        phi=diagonal("phi"),
        d=np.concatenate([fit.d for fit in fits], axis=1),
        sigma=diagonal("sigma"),
        sigma_u=diagonal("sigma_u"),
        sigma_v=diagonal("sigma_v"),
        sigma_w=diagonal("sigma_w"),
        reflect=np.zeros(fits[0].n_draws, dtype=int),
        final_states=_interleave([fit.final_states for fit in fits], n_blocks),
        state_mean=_interleave([fit.state_mean for fit in fits], n_blocks),
        trends=np.concatenate([fit.trends for fit in fits], axis=2),
        trend_start=fits[0].trend_start,
    )


def run_univariate_arm(
    panel: TimeSeriesPanel,
    spec: StructuralSpec,
    beta: np.ndarray,
    config: McmcConfig,
    rng: np.random.Generator,
    trend_start: Optional[int] = None,
    log_entry: str = LOG_ENTRY,
) -> PosteriorDraws:
    """
    Fit every store independently and combine the draws.

    Each store gets Gamma priors scaled by the sample variance of its residualised series.
    """

    data = apply_regression(panel, beta)
    generators = spawn_generators(int(rng.integers(2**62)), panel.n_series)
    fits = [
        run_univariate_chain(
            row,
            spec.seasonal_period,
            spec.slope_mode,
            univariate_priors(row),
            config,
            generator,
            trend_start,
            f"{log_entry}:{store}",
        )
        for store, row, generator in zip(panel.store_ids, data, generators)
    ]
    Logger.info(log_entry, f"{panel.n_series} stores fitted independently, {fits[0].n_draws} draws each")
    return combine_univariate(fits, spec, beta)
