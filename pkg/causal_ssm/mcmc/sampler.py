"""
Gibbs sampler of the multivariate structural model with graph-constrained covariances.

One sweep draws, in order, the state trajectory, the stationary slope parameters
(random walk Metropolis-Hastings), the long run slope level D and the four precision
matrices from their G-Wishart conditionals. Missing observations are imputed from their
conditional normal law inside the sweep.
"""

import dataclasses
from typing import Callable, List, Optional, Tuple

import numpy as np

from causal_ssm.errors import CausalSsmError, ValidationError
from causal_ssm.graph.decomposable import is_decomposable
from causal_ssm.graph.gwishart import sample_gwishart
from causal_ssm.linalg import logdet_spd, psd_factor, spd_inverse
from causal_ssm.logger import Logger
from causal_ssm.mcmc.models import GWishartPrior, McmcConfig, PosteriorDraws
from causal_ssm.panel.models import TimeSeriesPanel
from causal_ssm.state_space import FilterState, StateSpaceSystem, simulation_smoother
from causal_ssm.stationary import StationaryVarParams, initial_params, log_prior, to_phi
from causal_ssm.structural import (
    ComponentParams,
    CovariancePriors,
    SlopeMode,
    StructuralSpec,
    apply_regression,
    assemble_system,
    initial_moments,
)

LOG_ENTRY = "mcmc"

# Decay exponent of the Robbins-Monro step size.
ADAPTATION_EXPONENT = 0.6

LogTarget = Callable[[StationaryVarParams], float]


def sample_states(
    sys: StateSpaceSystem, data: np.ndarray, rng: np.random.Generator, filt: Optional[FilterState] = None
) -> np.ndarray:
    return simulation_smoother(sys, data, rng, filt)


def var_log_likelihood(slope: np.ndarray, phi: np.ndarray, d: np.ndarray, sigma_v: np.ndarray) -> float:
    """
    Log density of the slope transitions tau_{t+1} ~ N(D + Phi (tau_t - D), sigma_v), constants dropped.

    Args:
        slope (np.ndarray): Slope trajectory, shape (T, n).
        phi (np.ndarray): Slope coefficient.
        d (np.ndarray): Long run level.
        sigma_v (np.ndarray): Slope noise covariance.

    Returns:
        float: The log-likelihood.
    """

    if slope.shape[0] < 2:
        return 0.0
    residuals = slope[1:] - d - (slope[:-1] - d) @ phi.T
    quadratic = np.einsum("ti,ij,tj->", residuals, spd_inverse(sigma_v), residuals)
    return float(-0.5 * (quadratic + residuals.shape[0] * logdet_spd(sigma_v)))


def sample_phi_mh(
    current: StationaryVarParams,
    slope: np.ndarray,
    sigma_v: np.ndarray,
    d: np.ndarray,
    config: McmcConfig,
    rng: np.random.Generator,
    scales: Optional[np.ndarray] = None,
    log_target: Optional[LogTarget] = None,
) -> Tuple[StationaryVarParams, bool]:
    """
    One Metropolis-Hastings step on the unrestricted slope parameters.

    The continuous parameters move by a Gaussian random walk, the reflection flag is
    flipped with the configured probability. Both moves are symmetric so the acceptance
    ratio is the ratio of targets.

    Args:
        current (StationaryVarParams): Current parameters, re-anchored on sigma_v.
        slope (np.ndarray): Slope trajectory draw, shape (T, n).
        sigma_v (np.ndarray): Slope noise covariance.
        d (np.ndarray): Long run level.
        config (McmcConfig): Sampler configuration.
        rng (np.random.Generator): Random generator.
        scales (Optional[np.ndarray]): Random walk standard deviations, from the configuration when omitted.
        log_target (Optional[LogTarget]): Target override, the slope likelihood times the prior when omitted.

    Returns:
        Tuple[StationaryVarParams, bool]: The new parameters and whether the proposal was accepted.
    """

    current = current.with_anchor(sigma_v)

    def default_target(params: StationaryVarParams) -> float:
        try:
            phi, _ = to_phi(params)
        except (np.linalg.LinAlgError, CausalSsmError):
            return -np.inf
        if not np.all(np.isfinite(phi)):
            return -np.inf
        return var_log_likelihood(slope, phi, d, sigma_v) + log_prior(params, config.phi_prior_variance)

    target = log_target or default_target

    if scales is None:
        scales = config.scales(current.n_free)
    step = scales * rng.standard_normal(current.n_free)
    reflect = 1 - current.reflect if rng.random() < config.reflect_flip_probability else current.reflect
    proposal = current.from_vector(current.to_vector() + step, reflect)

    with np.errstate(over="ignore", invalid="ignore"):
        log_ratio = target(proposal) - target(current)
    if np.isnan(log_ratio):
        return current, False
    if np.log(rng.random()) < log_ratio:
        return proposal, True
    return current, False


def sample_d(
    slope: np.ndarray, phi: np.ndarray, sigma_v: np.ndarray, rng: np.random.Generator, prior_variance: float = 1.0
) -> np.ndarray:
    """
    Exact draw of D from its Gaussian conditional under a N(0, prior_variance I) prior.

    The transitions tau_{t+1} - Phi tau_t = (I - Phi) D + v_t make the conditional
    N(m, V) with V^-1 = I / prior_variance + (T - 1) (I - Phi)' sigma_v^-1 (I - Phi)
    and m = V (I - Phi)' sigma_v^-1 sum_t (tau_{t+1} - Phi tau_t).
    """

    n = phi.shape[0]
    identity = np.eye(n)
    if slope.shape[0] < 2:
        return rng.normal(0.0, np.sqrt(prior_variance), n)
    precision = spd_inverse(sigma_v)
    lifted = identity - phi
    moved = (slope[1:] - slope[:-1] @ phi.T).sum(axis=0)
    covariance = spd_inverse(identity / prior_variance + (slope.shape[0] - 1) * lifted.T @ precision @ lifted)
    mean = covariance @ lifted.T @ precision @ moved
    return mean + np.linalg.cholesky(covariance) @ rng.standard_normal(n)


def impute_missing(data: np.ndarray, signal: np.ndarray, sigma: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Fill missing observations with a draw from their normal law given the observed rows and the states.

    Args:
        data (np.ndarray): Observations, shape (n, T), NaN for missing entries.
        signal (np.ndarray): Mean z alpha_t of the observations, shape (n, T).
        sigma (np.ndarray): Observation noise covariance.
        rng (np.random.Generator): Random generator.

    Returns:
        np.ndarray: Completed observations.
    """

    completed = data.copy()
    for t in np.flatnonzero(np.isnan(data).any(axis=0)):
        missing = np.isnan(data[:, t])
        seen = ~missing
        mean = signal[missing, t]
        covariance = sigma[np.ix_(missing, missing)]
        if seen.any():
            coefficients = np.linalg.solve(sigma[np.ix_(seen, seen)], sigma[np.ix_(seen, missing)]).T
            mean = mean + coefficients @ (data[seen, t] - signal[seen, t])
            covariance = covariance - coefficients @ sigma[np.ix_(seen, missing)]
        completed[missing, t] = mean + psd_factor(covariance) @ rng.standard_normal(int(missing.sum()))
    return completed


def _draw_covariance(
    prior: GWishartPrior, scatter: np.ndarray, n_obs: int, rng: np.random.Generator, allow_nondecomposable: bool
) -> np.ndarray:
    df, scale = prior.posterior(scatter, n_obs)
    precision = sample_gwishart(df, scale, prior.adjacency, rng, allow_nondecomposable)
    return spd_inverse(precision)


def sample_covariances(
    residuals: np.ndarray,
    states: np.ndarray,
    sys: StateSpaceSystem,
    priors: List[GWishartPrior],
    rng: np.random.Generator,
    allow_nondecomposable: bool = False,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Draw sigma, sigma_u, sigma_v and sigma_w from their G-Wishart conditionals.

    Args:
        residuals (np.ndarray): Complete observation residuals y_t - z alpha_t, shape (n, T).
        states (np.ndarray): State trajectory, shape (T, m).
        sys (StateSpaceSystem): System whose transition and intercept define the state noise.
        priors (List[GWishartPrior]): Priors of the four precisions, in that order.
        rng (np.random.Generator): Random generator.
        allow_nondecomposable (bool): Enable the completion sampler.

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]: The four covariance draws.
    """

    n, n_times = residuals.shape
    sigma = _draw_covariance(priors[0], residuals @ residuals.T, n_times, rng, allow_nondecomposable)
    noise = states[1:] - sys.state_intercept - states[:-1] @ sys.transition.T
    blocks = []
    for index, prior in enumerate(priors[1:]):
        block = noise[:, index * n : (index + 1) * n]
        blocks.append(_draw_covariance(prior, block.T @ block, n_times - 1, rng, allow_nondecomposable))
    return sigma, blocks[0], blocks[1], blocks[2]


def run_chain(
    panel: TimeSeriesPanel,
    spec: StructuralSpec,
    beta: np.ndarray,
    priors: Optional[CovariancePriors] = None,
    config: Optional[McmcConfig] = None,
    rng: Optional[np.random.Generator] = None,
    initial: Optional[ComponentParams] = None,
    trend_start: Optional[int] = None,
    log_entry: str = LOG_ENTRY,
) -> PosteriorDraws:
    """
    Run the Gibbs sampler on Y - X beta.

    The slope parameters and D are only sampled for a stationary slope, a random walk
    slope keeps Phi = I and D = 0.

    Args:
        panel (TimeSeriesPanel): Observations and controls.
        spec (StructuralSpec): Model shape.
        beta (np.ndarray): Regression coefficients, held fixed.
        priors (Optional[CovariancePriors]): Covariance priors, the defaults when omitted.
        config (Optional[McmcConfig]): Sampler configuration, the defaults when omitted.
        rng (Optional[np.random.Generator]): Random generator, seeded from the configuration when omitted.
        initial (Optional[ComponentParams]): Starting parameters, scaled identities when omitted.
        trend_start (Optional[int]): First time whose trend draws are kept, none are kept when omitted.
        log_entry (str): Log entry of the chain.

    Returns:
        PosteriorDraws: The retained sweeps.

    Raises:
        ValidationError: On inconsistent inputs or a non-decomposable graph without the fallback.
        NumericalError: If a sweep fails, the message carries the sweep index.
    """

    config = config or McmcConfig()
    priors = priors or CovariancePriors()
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    n, m, n_times = spec.n_series, spec.state_dim, panel.n_times
    if panel.n_series != n:
        raise ValidationError(f"Panel has {panel.n_series} series, model has {n}")
    trend_start = n_times if trend_start is None else trend_start
    if not 0 <= trend_start <= n_times:
        raise ValidationError(f"Trend start {trend_start} outside of [0, {n_times}]")
    if not is_decomposable(spec.adjacency):
        if not config.allow_nondecomposable:
            raise ValidationError("Store graph is not decomposable and the completion sampler is disabled")
        Logger.warning(log_entry, "Store graph is not decomposable, precisions drawn with the completion sampler")

    stationary = spec.slope_mode == SlopeMode.STATIONARY
    data = apply_regression(panel, beta)
    gwishart = GWishartPrior.from_priors(priors, spec.adjacency)
    init_mean, init_cov = initial_moments(spec, variance=config.init_variance)
    params = initial or ComponentParams.scaled_identity(n, 0.1, 0.01)
    if not stationary:
        params = dataclasses.replace(params, phi=np.eye(n), d=np.zeros(n))
    var_params = initial_params(params.phi, params.sigma_v) if stationary else None
    scales = config.scales(n * n)
    log_multiplier = 0.0

    kept = config.n_kept
    draws = {name: np.zeros((kept, n, n)) for name in ("phi", "sigma", "sigma_u", "sigma_v", "sigma_w")}
    d_draws = np.zeros((kept, n))
    reflect = np.zeros(kept, dtype=int)
    final_states = np.zeros((kept, m))
    trends = np.zeros((kept, n_times - trend_start, n))
    state_sum = np.zeros((n_times, m))
    accepted = proposed = 0
    slot = 0

    for iteration in range(config.n_iters):
        try:
            sys = assemble_system(spec, params, init_mean, init_cov, validate=False)
            states = sample_states(sys, data, rng)
            signal = sys.obs_matrix @ states.T
            completed = impute_missing(data, signal, params.sigma, rng)

            phi, d = params.phi, params.d
            if var_params is not None:
                slope = states[:, spec.block(1)]
                var_params, step_accepted = sample_phi_mh(
                    var_params, slope, params.sigma_v, d, config, rng, scales * np.exp(log_multiplier)
                )
                proposed += 1
                accepted += int(step_accepted)
                if config.adapt and iteration < config.n_burnin:
                    gain = (iteration + 1) ** -ADAPTATION_EXPONENT
                    log_multiplier += gain * (float(step_accepted) - config.target_acceptance)
                phi = to_phi(var_params.with_anchor(params.sigma_v))[0]
                d = sample_d(slope, phi, params.sigma_v, rng, config.d_prior_variance)

            moved = dataclasses.replace(params, phi=phi, d=d)
            updated = assemble_system(spec, moved, init_mean, init_cov, validate=False)
            sigma, sigma_u, sigma_v, sigma_w = sample_covariances(
                completed - signal, states, updated, gwishart, rng, config.allow_nondecomposable
            )
            if var_params is not None:
                phi = to_phi(var_params.with_anchor(sigma_v))[0]
            params = ComponentParams(sigma=sigma, sigma_u=sigma_u, sigma_v=sigma_v, sigma_w=sigma_w, phi=phi, d=d)
        except CausalSsmError as error:
            message = f"Sweep {iteration}: {error}"
            Logger.error(log_entry, message)
            raise type(error)(message) from error

        if iteration < config.n_burnin or (iteration - config.n_burnin) % config.thinning:
            continue
        for name in draws:
            draws[name][slot] = getattr(params, name)
        d_draws[slot] = params.d
        reflect[slot] = 0 if var_params is None else var_params.reflect
        final_states[slot] = states[-1]
        trends[slot] = states[trend_start:, spec.block(0)]
        state_sum += states
        slot += 1

    result = PosteriorDraws(
        spec=spec,
        beta=np.asarray(beta, dtype=float),
        phi=draws["phi"],
        d=d_draws,
        sigma=draws["sigma"],
        sigma_u=draws["sigma_u"],
        sigma_v=draws["sigma_v"],
        sigma_w=draws["sigma_w"],
        reflect=reflect,
        final_states=final_states,
        state_mean=state_sum / kept,
        trends=trends,
        trend_start=trend_start,
        accepted=accepted,
        proposed=proposed,
    )
    if proposed:
        Logger.info(log_entry, f"{config.n_iters} sweeps, {kept} kept, acceptance rate {result.acceptance_rate:.3f}")
    else:
        Logger.info(log_entry, f"{config.n_iters} sweeps, {kept} kept")
    return result
