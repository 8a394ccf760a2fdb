"""
Spike-and-slab EM selection of control regressors.

Each iteration smooths the states of the model fitted to Y - X beta, computes the
posterior inclusion weights of every coefficient, and maximises the expected complete
log posterior block by block in the order theta, beta, Phi, Sigma, Q. Covariance updates
are projected onto the precision cone of the store graph.
"""

import asyncio
import dataclasses
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.special import expit, xlogy
from scipy.stats import norm

from causal_ssm.emvs.models import (
    EmvsState,
    EmvsVariant,
    PathRow,
    SelectionResult,
    SpikeSlabConfig,
    StateExpectations,
)
from causal_ssm.errors import NumericalError, ValidationError
from causal_ssm.graph.ips import project_to_graph
from causal_ssm.linalg import logdet_spd, min_eigenvalue, spd_inverse, symmetrize
from causal_ssm.logger import Logger
from causal_ssm.panel.models import TimeSeriesPanel
from causal_ssm.state_space import SmoothedMoments, StateSpaceSystem, backward_smoother, kalman_filter
from causal_ssm.structural import (
    CovariancePriors,
    SlopeMode,
    StructuralSpec,
    apply_regression,
    assemble_system,
    initial_moments,
)
from causal_ssm.utils import write_table

LOG_ENTRY = "emvs"
MONOTONE_SLACK = 1e-8


def e_step_gamma(
    beta: np.ndarray, theta: float, v0: float, v1: float, temperature: float = 1.0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Posterior inclusion weights and expected prior precisions of the coefficients.

    Args:
        beta (np.ndarray): Current coefficients.
        theta (float): Current prior inclusion probability.
        v0 (float): Spike variance.
        v1 (float): Slab variance.
        temperature (float): Annealing exponent s applied to both mixture terms.

    Returns:
        Tuple[np.ndarray, np.ndarray]: The weights w and the precisions a* = (1 - w) / v0 + w / v1.
    """

    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    with np.errstate(divide="ignore"):
        log_slab = norm.logpdf(beta, scale=np.sqrt(v1)) + np.log(theta)
        log_spike = norm.logpdf(beta, scale=np.sqrt(v0)) + np.log1p(-theta)
    weights = expit(temperature * (log_slab - log_spike))
    return weights, (1.0 - weights) / v0 + weights / v1


def m_step_theta(weights: np.ndarray, zeta1: float, zeta2: float) -> float:
    """
    Maximiser of the theta part of the objective under a Beta(zeta1, zeta2) prior.

    Raises:
        ValidationError: If p + zeta1 + zeta2 - 2 is not positive.
    """

    weights = np.atleast_1d(weights)
    denominator = weights.size + zeta1 + zeta2 - 2.0
    if denominator <= 0:
        raise ValidationError(f"Degenerate Beta prior: p + zeta1 + zeta2 - 2 = {denominator}")
    return float(np.clip((weights.sum() + zeta1 - 1.0) / denominator, 0.0, 1.0))


def theta_objective(theta: float, weights: np.ndarray, zeta1: float, zeta2: float) -> float:
    total = float(np.sum(weights))
    return float(xlogy(total + zeta1 - 1.0, theta) + xlogy(weights.size - total + zeta2 - 1.0, 1.0 - theta))


def complete_missing(
    observed: np.ndarray, effect: np.ndarray, sigma: np.ndarray, obs_matrix: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Integrate missing observations out of the residual moments.

    At a time with missing rows M and observed rows O, the missing residual is
    B eps_O + eta with B = Sigma_MO Sigma_OO^-1 and eta ~ N(0, Sigma_M.O).

    Args:
        observed (np.ndarray): Observations, shape (n, T), NaN for missing entries.
        effect (np.ndarray): Regression term at the current coefficients, shape (n, T).
        sigma (np.ndarray): Current observation noise covariance.
        obs_matrix (np.ndarray): Observation matrix z.

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray]: Completed data, per-time loadings and extra covariances.
    """

    n, n_times = observed.shape
    completed = observed.copy()
    loadings = np.repeat(obs_matrix[np.newaxis], n_times, axis=0)
    extra = np.zeros((n_times, n, n))
    for t in np.flatnonzero(np.isnan(observed).any(axis=0)):
        missing = np.isnan(observed[:, t])
        seen = ~missing
        if seen.any():
            coefficients = np.linalg.solve(sigma[np.ix_(seen, seen)], sigma[np.ix_(seen, missing)]).T
        else:
            coefficients = np.zeros((int(missing.sum()), 0))
        completed[missing, t] = effect[missing, t] + coefficients @ (observed[seen, t] - effect[seen, t])
        loadings[t, missing] = coefficients @ obs_matrix[seen]
        residual = sigma[np.ix_(missing, missing)] - coefficients @ sigma[np.ix_(seen, missing)]
        extra[t][np.ix_(missing, missing)] = residual
    return completed, loadings, extra


def e_step_states(
    panel: TimeSeriesPanel, beta: np.ndarray, sigma: np.ndarray, sys: Optional[StateSpaceSystem]
) -> StateExpectations:
    """
    State expectations given the current parameters, sys is None for the model without states.
    """

    n_times = panel.n_times
    if sys is None:
        obs_matrix = np.zeros((panel.n_series, 1))
        smoothed = SmoothedMoments(
            smoothed_means=np.zeros((n_times, 1)),
            smoothed_covs=np.zeros((n_times, 1, 1)),
            lag_one_covs=np.zeros((max(n_times - 1, 0), 1, 1)),
        )
    else:
        obs_matrix = sys.obs_matrix
        smoothed = backward_smoother(sys, kalman_filter(sys, apply_regression(panel, beta)))
    completed, loadings, extra = complete_missing(panel.observed, panel.regression_effect(beta), sigma, obs_matrix)
    return StateExpectations(completed=completed, loadings=loadings, extra_covs=extra, smoothed=smoothed)


def m_step_beta(
    designs: np.ndarray,
    targets: np.ndarray,
    sigma: np.ndarray,
    precision_weights: np.ndarray,
    woodbury: Optional[bool] = None,
) -> np.ndarray:
    """
    Ridge-type coefficient update (sum X_t' Sigma^-1 X_t + A*)^-1 sum X_t' Sigma^-1 d_t.

    Args:
        designs (np.ndarray): Design matrices X_t, shape (T, n, p).
        targets (np.ndarray): Expected regression targets d_t = E[Y_t - z alpha_t], shape (n, T).
        sigma (np.ndarray): Observation noise covariance.
        precision_weights (np.ndarray): Diagonal of A*, strictly positive.
        woodbury (Optional[bool]): Invert through the stacked (nT x nT) system instead of the (p x p) one,
            chosen automatically when None.

    Returns:
        np.ndarray: The updated coefficients.
    """

    n_times, n, p = designs.shape
    if p == 0 or n_times == 0:
        return np.zeros(p)
    precision = spd_inverse(sigma)
    rhs = np.einsum("tnp,nk,kt->p", designs, precision, targets)
    if woodbury is None:
        woodbury = p > n * n_times
    if not woodbury:
        gram = np.einsum("tnp,nk,tkq->pq", designs, precision, designs) + np.diag(precision_weights)
        return scipy.linalg.solve(symmetrize(gram), rhs, assume_a="pos")

    stacked = designs.reshape(n_times * n, p)
    inverse_weights = 1.0 / precision_weights
    inner = np.kron(np.eye(n_times), sigma) + (stacked * inverse_weights) @ stacked.T
    scaled = inverse_weights * rhs
    correction = scipy.linalg.solve(symmetrize(inner), stacked @ scaled, assume_a="pos")
    return scaled - inverse_weights * (stacked.T @ correction)


def m_step_phi(
    smoothed: SmoothedMoments, slope: slice, sigma_v: np.ndarray, prior_variance: float = 0.1
) -> np.ndarray:
    """
    Slope coefficient update under the N(0, prior_variance) ridge prior on vec(Phi).

    Solves (sum V_t' kron Sigma_v^-1 + I / prior_variance) vec(Phi) = vec(Sigma_v^-1 sum C_t) with
    V_t = E[tau_t tau_t'] and C_t = E[tau_{t+1} tau_t'].
    """

    n = sigma_v.shape[0]
    second = smoothed.second_moments[:-1, slope, slope].sum(axis=0)
    cross = smoothed.cross_moments[:, slope, slope].sum(axis=0)
    precision = spd_inverse(sigma_v)
    lhs = np.kron(second.T, precision) + np.eye(n * n) / prior_variance
    rhs = (precision @ cross).ravel(order="F")
    return np.linalg.solve(lhs, rhs).reshape((n, n), order="F")


def residual_scatter(panel: TimeSeriesPanel, beta: np.ndarray, expectations: StateExpectations) -> np.ndarray:
    """
    Expected residual scatter sum E[e_t e_t'] with e_t = Y_t - X_t beta - z alpha_t.
    """

    errors = expectations.completed - panel.regression_effect(beta)
    signal = expectations.expected_signal
    cross = errors @ signal.T
    smoothed_part = np.einsum(
        "tnm,tmk,tjk->nj", expectations.loadings, expectations.smoothed.second_moments, expectations.loadings
    )
    return symmetrize(errors @ errors.T - cross - cross.T + smoothed_part + expectations.extra_covs.sum(axis=0))


def state_noise_scatter(transition: np.ndarray, smoothed: SmoothedMoments, n_noise: int) -> np.ndarray:
    """
    Expected scatter of the state noise, sum E[(alpha_{t+1} - T alpha_t)(alpha_{t+1} - T alpha_t)'] on the noisy states.
    """

    if smoothed.n_times < 2:
        return np.zeros((n_noise, n_noise))
    second = smoothed.second_moments
    moved = np.einsum("ij,tkj->tik", transition, smoothed.cross_moments)
    total = second[1:] - moved - np.transpose(moved, (0, 2, 1))
    total = total + np.einsum("ij,tjk,lk->til", transition, second[:-1], transition)
    return symmetrize(total.sum(axis=0)[:n_noise, :n_noise])


def _graph_update(scatter: np.ndarray, denominator: float, adjacency: np.ndarray, name: str) -> np.ndarray:
    if denominator <= 0:
        raise ValidationError(f"Too few observations to update {name}")
    target = symmetrize(scatter / denominator)
    if min_eigenvalue(target) <= 0:
        raise NumericalError(f"Scatter of {name} is not positive definite")
    return project_to_graph(target, adjacency)


def m_step_sigma(
    scatter: np.ndarray, n_times: int, priors: CovariancePriors, adjacency: np.ndarray
) -> np.ndarray:
    """
    Observation covariance update (scatter + H) / (T + nu - 2), projected onto the graph.
    """

    scale = priors.scales(scatter.shape[0])[0]
    return _graph_update(scatter + scale, n_times + priors.df - 2.0, adjacency, "sigma")


def m_step_state_cov(
    scatter: np.ndarray, n_times: int, priors: CovariancePriors, adjacency: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Trend, slope and seasonal covariance updates from the state noise scatter.

    Cross-component blocks of the scatter are dropped, each diagonal block gets its
    k^2 (n + 1) H prior term and is divided by T + nu - 3.
    """

    n = adjacency.shape[0]
    scales = priors.scales(n)[1:]
    updates = []
    for index, (name, scale) in enumerate(zip(("sigma_u", "sigma_v", "sigma_w"), scales)):
        block = slice(index * n, (index + 1) * n)
        updates.append(_graph_update(scatter[block, block] + scale, n_times + priors.df - 3.0, adjacency, name))
    return updates[0], updates[1], updates[2]


def m_step_covariances(
    panel: TimeSeriesPanel,
    beta: np.ndarray,
    expectations: StateExpectations,
    transition: np.ndarray,
    priors: CovariancePriors,
    adjacency: np.ndarray,
) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """
    Sigma and the blocks of Q, both projected onto the graph.
    """

    sigma = m_step_sigma(residual_scatter(panel, beta, expectations), panel.n_times, priors, adjacency)
    scatter = state_noise_scatter(transition, expectations.smoothed, 3 * panel.n_series)
    return sigma, m_step_state_cov(scatter, panel.n_times, priors, adjacency)


def _variant_spec(spec: StructuralSpec, variant: EmvsVariant) -> StructuralSpec:
    slope_mode = SlopeMode.RANDOM_WALK if variant == EmvsVariant.NONSTATIONARY else SlopeMode.STATIONARY
    return dataclasses.replace(spec, slope_mode=slope_mode)


def _system(spec: StructuralSpec, state: EmvsState, init_mean: np.ndarray, init_cov: np.ndarray) -> StateSpaceSystem:
    return assemble_system(spec, state.component_params(), init_mean, init_cov, validate=False)


def q_value(
    panel: TimeSeriesPanel,
    spec: StructuralSpec,
    state: EmvsState,
    expectations: StateExpectations,
    weights: np.ndarray,
    precision_weights: np.ndarray,
    priors: CovariancePriors,
    config: SpikeSlabConfig,
) -> float:
    """
    Expected complete log posterior of the parameters in state, up to an additive constant.
    """

    n, n_times = panel.n_series, panel.n_times
    scales = priors.scales(n)
    scatter = residual_scatter(panel, state.beta, expectations) + scales[0]
    total = -0.5 * float(np.trace(spd_inverse(state.sigma) @ scatter))
    total -= 0.5 * (n_times + priors.df - 2.0) * logdet_spd(state.sigma)

    if config.variant != EmvsVariant.MISSPECIFIED:
        m = spec.state_dim
        transition = _system(spec, state, np.zeros(m), np.zeros((m, m))).transition
        scatter = state_noise_scatter(transition, expectations.smoothed, 3 * n)
        for index, (covariance, scale) in enumerate(zip((state.sigma_u, state.sigma_v, state.sigma_w), scales[1:])):
            block = slice(index * n, (index + 1) * n)
            total -= 0.5 * float(np.trace(spd_inverse(covariance) @ (scatter[block, block] + scale)))
            total -= 0.5 * (n_times + priors.df - 3.0) * logdet_spd(covariance)
        if config.variant == EmvsVariant.STATIONARY:
            total -= 0.5 * float(np.sum(state.phi**2)) / config.phi_prior_variance

    total -= 0.5 * float(np.sum(precision_weights * state.beta**2))
    return total + theta_objective(state.theta, weights, config.zeta1, config.zeta2)


def run_emvs(
    panel: TimeSeriesPanel,
    spec: StructuralSpec,
    config: SpikeSlabConfig,
    v0: float,
    priors: Optional[CovariancePriors] = None,
    initial: Optional[EmvsState] = None,
    log_entry: str = LOG_ENTRY,
) -> EmvsState:
    """
    Run the EM selection at one spike variance.

    Args:
        panel (TimeSeriesPanel): Observations and controls, usually the pre-period.
        spec (StructuralSpec): Model shape, the slope mode follows the configured variant.
        config (SpikeSlabConfig): Selection configuration.
        v0 (float): Spike variance.
        priors (Optional[CovariancePriors]): Covariance priors, the defaults when omitted.
        initial (Optional[EmvsState]): Starting point, the configured default when omitted.
        log_entry (str): Log entry of the run.

    Returns:
        EmvsState: The final iterate.

    Raises:
        NumericalError: If an M-step decreases the objective beyond the slack.
        ValidationError: If there are too few observations for the covariance updates.
    """

    priors = priors or CovariancePriors()
    variant = config.variant
    n, p, n_times = panel.n_series, panel.n_controls, panel.n_times
    state = initial if initial is not None else EmvsState.initial(n, p, config)
    state = dataclasses.replace(state, v0=v0, q_value=-np.inf, q_trace=[], iterations=0, converged=False)
    if n_times == 0:
        Logger.warning(log_entry, f"v0={v0:.6g}: no observations, coefficients kept at their starting values")
        return state

    offset = 2.0 if variant == EmvsVariant.MISSPECIFIED else 3.0
    if n_times + priors.df - offset <= 0:
        raise ValidationError(f"{n_times} time points are too few for the covariance updates")

    spec = _variant_spec(spec, variant)
    init_mean, init_cov = initial_moments(spec, variance=config.init_variance)
    designs = panel.designs()
    for iteration in range(1, config.max_iters + 1):
        sys = None if variant == EmvsVariant.MISSPECIFIED else _system(spec, state, init_mean, init_cov)
        expectations = e_step_states(panel, state.beta, state.sigma, sys)
        weights, precision_weights = e_step_gamma(state.beta, state.theta, v0, config.v1, config.temperature)
        q_before = q_value(panel, spec, state, expectations, weights, precision_weights, priors, config)

        theta = m_step_theta(weights, config.zeta1, config.zeta2)
        targets = expectations.completed - expectations.expected_signal
        beta = m_step_beta(designs, targets, state.sigma, precision_weights)
        phi = state.phi
        if variant == EmvsVariant.STATIONARY:
            phi = m_step_phi(expectations.smoothed, spec.block(1), state.sigma_v, config.phi_prior_variance)
        sigma = m_step_sigma(residual_scatter(panel, beta, expectations), n_times, priors, spec.adjacency)
        sigma_u, sigma_v, sigma_w = state.sigma_u, state.sigma_v, state.sigma_w
        if variant != EmvsVariant.MISSPECIFIED:
            moved = dataclasses.replace(state, phi=phi)
            transition = _system(spec, moved, init_mean, init_cov).transition
            scatter = state_noise_scatter(transition, expectations.smoothed, 3 * n)
            sigma_u, sigma_v, sigma_w = m_step_state_cov(scatter, n_times, priors, spec.adjacency)

        candidate = dataclasses.replace(
            state,
            beta=beta,
            theta=theta,
            phi=phi,
            sigma=sigma,
            sigma_u=sigma_u,
            sigma_v=sigma_v,
            sigma_w=sigma_w,
            inclusion_weights=weights,
            precision_weights=precision_weights,
            iterations=iteration,
        )
        q_after = q_value(panel, spec, candidate, expectations, weights, precision_weights, priors, config)
        if q_after < q_before - MONOTONE_SLACK * max(1.0, abs(q_before)):
            message = (
                f"v0={v0:.6g}: objective decreased from {q_before:.12g} to {q_after:.12g} at iteration {iteration}"
            )
            Logger.error(log_entry, message)
            raise NumericalError(message)

        previous = state.q_value
        candidate.q_value = q_after
        candidate.q_trace = state.q_trace + [q_after]
        state = candidate
        if np.isfinite(previous) and abs(q_after - previous) <= config.convergence_tol * max(1.0, abs(previous)):
            state.converged = True
            break

    Logger.info(
        log_entry,
        f"v0={v0:.6g}: {state.iterations} iterations, converged={state.converged}, theta={state.theta:.6g}",
    )
    return state


def selection_threshold(v0: float, v1: float, theta: float) -> Tuple[float, bool]:
    """
    Smallest |beta| whose posterior inclusion probability exceeds one half.

    Args:
        v0 (float): Spike variance.
        v1 (float): Slab variance.
        theta (float): Estimated prior inclusion probability.

    Returns:
        Tuple[float, bool]: The threshold and a flag raised when the formula has no valid solution.
    """

    denominator = 1.0 / v1 - 1.0 / v0
    if np.isclose(denominator, 0.0, rtol=0.0, atol=1e-12):
        return 0.0, True
    if theta <= 0.0:
        return float(np.inf), False
    if theta >= 1.0:
        return 0.0, False
    radicand = (np.log(v0 / v1) + 2.0 * np.log(theta / (1.0 - theta))) / denominator
    if radicand < 0.0:
        return 0.0, True
    return float(np.sqrt(radicand)), False


def _scan_warm(
    panel: TimeSeriesPanel,
    spec: StructuralSpec,
    config: SpikeSlabConfig,
    priors: Optional[CovariancePriors],
    log_entry: str,
) -> List[EmvsState]:
    states: List[EmvsState] = []
    previous: Optional[EmvsState] = None
    for v0 in config.v0_grid:
        previous = run_emvs(panel, spec, config, v0, priors, previous, log_entry)
        states.append(previous)
    return states


async def v0_grid_scan_async(
    panel: TimeSeriesPanel,
    spec: StructuralSpec,
    config: SpikeSlabConfig,
    priors: Optional[CovariancePriors] = None,
    max_parallel: int = 4,
    log_entry: str = LOG_ENTRY,
) -> List[EmvsState]:
    """
    Run the selection over the spike variance grid.

    With warm starts the grid is walked in order, each point starting from the previous
    solution. Otherwise the grid points are independent and run concurrently, each one
    logging under its own entry.
    """

    if config.warm_start:
        return await asyncio.to_thread(_scan_warm, panel, spec, config, priors, log_entry)

    semaphore = asyncio.Semaphore(max_parallel)

    async def run_point(index: int, v0: float) -> EmvsState:
        async with semaphore:
            return await asyncio.to_thread(run_emvs, panel, spec, config, v0, priors, None, f"{log_entry}:{index}")

    return list(await asyncio.gather(*(run_point(index, v0) for index, v0 in enumerate(config.v0_grid))))


def v0_grid_scan(
    panel: TimeSeriesPanel,
    spec: StructuralSpec,
    config: SpikeSlabConfig,
    priors: Optional[CovariancePriors] = None,
    max_parallel: int = 4,
    log_entry: str = LOG_ENTRY,
) -> List[EmvsState]:
    return asyncio.run(v0_grid_scan_async(panel, spec, config, priors, max_parallel, log_entry))


def path_rows(panel: TimeSeriesPanel, states: Sequence[EmvsState], config: SpikeSlabConfig) -> List[PathRow]:
    """
    Flatten a regularisation path into one row per spike variance and coefficient.
    """

    owners = [(store, control) for store, names in zip(panel.store_ids, panel.control_ids) for control in names]
    rows = []
    for state in states:
        threshold, degenerate = selection_threshold(state.v0, config.v1, state.theta)
        for index, ((store, control), beta, weight) in enumerate(zip(owners, state.beta, state.inclusion_weights)):
            rows.append(
                PathRow(
                    v0=state.v0,
                    index=index,
                    store_id=store,
                    control_id=control,
                    beta=float(beta),
                    weight=float(weight),
                    theta=state.theta,
                    threshold=threshold,
                    degenerate=degenerate,
                )
            )
    return rows


def write_path_table(rows: Sequence[PathRow], file_name: str) -> None:
    columns = [field.name for field in dataclasses.fields(PathRow)]
    frame = pd.DataFrame([dataclasses.asdict(row) for row in rows], columns=columns)
    write_table(frame, file_name)


def select_coefficients(
    panel: TimeSeriesPanel, states: Sequence[EmvsState], config: SpikeSlabConfig, log_entry: str = LOG_ENTRY
) -> SelectionResult:
    """
    Read the selected controls off the last point of a regularisation path.

    Coefficients below the selection threshold are set to zero. Stores left without any
    selected control are reported as dropped.

    Raises:
        ValidationError: If the path is empty.
    """

    if not states:
        raise ValidationError("Empty regularisation path")
    state = states[-1]
    threshold, degenerate = selection_threshold(state.v0, config.v1, state.theta)
    if degenerate:
        Logger.warning(log_entry, f"v0={state.v0:.6g}: degenerate selection threshold, every control kept")
    keep = np.abs(state.beta) >= threshold
    beta = np.where(keep, state.beta, 0.0)
    support = [mask.astype(bool) for mask in panel.split_beta(keep.astype(float))]

    dropped = [store for store, mask in zip(panel.store_ids, support) if not mask.any()]
    for store in dropped:
        Logger.warning(store, "No control selected, store dropped from the causal analysis")
    return SelectionResult(
        beta=beta,
        support=support,
        threshold=threshold,
        theta=state.theta,
        v0=state.v0,
        degenerate=degenerate,
        dropped_stores=dropped,
    )
