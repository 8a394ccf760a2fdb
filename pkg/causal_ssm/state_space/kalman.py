from typing import Optional, Tuple, Union

import numpy as np

from causal_ssm.errors import NumericalError, ValidationError
from causal_ssm.linalg import psd_factor, symmetrize
from causal_ssm.state_space.models import FilterState, SmoothedMoments, StateSpaceSystem

MAX_INNOVATION_CONDITION = 1e12

RandomSource = Union[None, int, np.random.Generator]


def as_observations(sys: StateSpaceSystem, data: np.ndarray) -> np.ndarray:
    """
    Validate an observation matrix of shape (n, T), NaN marking missing entries.

    A one-dimensional array is accepted for single-series systems.
    """

    data = np.asarray(data, dtype=float)
    if data.ndim == 1 and sys.n_obs == 1:
        data = data[np.newaxis, :]
    if data.ndim != 2 or data.shape[0] != sys.n_obs:
        raise ValidationError(f"Observations must have shape ({sys.n_obs}, T), got {data.shape}")
    return data


def kalman_filter(sys: StateSpaceSystem, data: np.ndarray) -> FilterState:
    """
    Run the Kalman filter in predictive form.

    Partially observed times use the observed rows of z and the matching block of the
    observation covariance, fully missing times reduce to the prediction step.

    Args:
        sys (StateSpaceSystem): The model.
        data (np.ndarray): Observations, shape (n, T), NaN for missing entries.

    Returns:
        FilterState: Innovations, gains and predicted moments for every time.

    Raises:
        NumericalError: If an innovation covariance has condition number above 1e12.
    """

    data = as_observations(sys, data)
    n_times = data.shape[1]
    m = sys.n_states
    observed = ~np.isnan(data.T)
    state_noise = sys.state_noise_cov

    predicted_means = np.zeros((n_times + 1, m))
    predicted_covs = np.zeros((n_times + 1, m, m))
    filtered_means = np.zeros((n_times, m))
    filtered_covs = np.zeros((n_times, m, m))
    companions = np.zeros((n_times, m, m))
    innovations, innovation_covs, innovation_precisions, gains = [], [], [], []

    a = sys.init_mean.copy()
    P = symmetrize(sys.init_cov)
    for t in range(n_times):
        predicted_means[t] = a
        predicted_covs[t] = P

        rows = observed[t]
        z = sys.obs_matrix[rows]
        nu = data[rows, t] - z @ a
        F = symmetrize(z @ P @ z.T + sys.obs_cov[np.ix_(rows, rows)])
        if rows.any():
            condition = np.linalg.cond(F)
            if not np.isfinite(condition) or condition > MAX_INNOVATION_CONDITION:
                raise NumericalError(f"Innovation covariance is numerically singular at time {t}")
            F_inv = symmetrize(np.linalg.inv(F))
        else:
            F_inv = np.zeros((0, 0))

        PzF = P @ z.T @ F_inv
        filtered_means[t] = a + PzF @ nu
        filtered_covs[t] = symmetrize(P - PzF @ z @ P)

        K = sys.transition @ PzF
        L = sys.transition - K @ z
        a = sys.state_intercept + sys.transition @ a + K @ nu
        P = symmetrize(sys.transition @ P @ L.T + state_noise)

        innovations.append(nu)
        innovation_covs.append(F)
        innovation_precisions.append(F_inv)
        gains.append(K)
        companions[t] = L

    predicted_means[n_times] = a
    predicted_covs[n_times] = P

    return FilterState(
        observed=observed,
        innovations=innovations,
        innovation_covs=innovation_covs,
        innovation_precisions=innovation_precisions,
        gains=gains,
        companions=companions,
        predicted_means=predicted_means,
        predicted_covs=predicted_covs,
        filtered_means=filtered_means,
        filtered_covs=filtered_covs,
    )


def backward_smoother(sys: StateSpaceSystem, filt: FilterState) -> SmoothedMoments:
    """
    Fixed-interval smoother over the output of kalman_filter.

    Runs the r/N backward recursions and reads off the smoothed means, covariances
    and the lag-one cross-covariances Cov(alpha_t, alpha_{t+1} | Y).

    Args:
        sys (StateSpaceSystem): The model used by the filter.
        filt (FilterState): Filter output on the same model.

    Returns:
        SmoothedMoments: Smoothed state moments.
    """

    n_times = filt.n_times
    m = sys.n_states
    identity = np.eye(m)

    means = np.zeros((n_times, m))
    covs = np.zeros((n_times, m, m))
    lag_one = np.zeros((max(n_times - 1, 0), m, m))

    r = np.zeros(m)
    N = np.zeros((m, m))
    N_next = np.zeros((m, m))
    for t in reversed(range(n_times)):
        z = sys.obs_matrix[filt.observed[t]]
        L = filt.companions[t]
        zF = z.T @ filt.innovation_precisions[t]
        r = zF @ filt.innovations[t] + L.T @ r
        N = symmetrize(zF @ z + L.T @ N @ L)

        a = filt.predicted_means[t]
        P = filt.predicted_covs[t]
        means[t] = a + P @ r
        covs[t] = symmetrize(P - P @ N @ P)
        if t < n_times - 1:
            lag_one[t] = P @ L.T @ (identity - N_next @ filt.predicted_covs[t + 1])
        N_next = N

    return SmoothedMoments(smoothed_means=means, smoothed_covs=covs, lag_one_covs=lag_one)


def smoothed_means(sys: StateSpaceSystem, filt: FilterState, data: np.ndarray, demeaned: bool = False) -> np.ndarray:
    """
    Smoothed state means for new data sharing the missing pattern of filt.

    Gains and innovation covariances do not depend on the observed values, so only the
    mean recursions are run.

    Args:
        sys (StateSpaceSystem): The model used by the filter.
        filt (FilterState): Filter output providing the gains.
        data (np.ndarray): Observations, shape (n, T), with the same missing entries.
        demeaned (bool): Ignore the state intercept and the initial mean.

    Returns:
        np.ndarray: Smoothed means, shape (T, m).
    """

    data = as_observations(sys, data)
    n_times = filt.n_times
    m = sys.n_states
    intercept = np.zeros(m) if demeaned else sys.state_intercept

    a = np.zeros(m) if demeaned else sys.init_mean.copy()
    predicted = np.zeros((n_times, m))
    innovations = []
    for t in range(n_times):
        predicted[t] = a
        rows = filt.observed[t]
        nu = data[rows, t] - sys.obs_matrix[rows] @ a
        innovations.append(nu)
        a = intercept + sys.transition @ a + filt.gains[t] @ nu

    means = np.zeros((n_times, m))
    r = np.zeros(m)
    for t in reversed(range(n_times)):
        z = sys.obs_matrix[filt.observed[t]]
        r = z.T @ filt.innovation_precisions[t] @ innovations[t] + filt.companions[t].T @ r
        means[t] = predicted[t] + filt.predicted_covs[t] @ r
    return means


def simulate_system(
    sys: StateSpaceSystem, n_times: int, rng: RandomSource = None, initial_state: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw a state trajectory and observations from the model.

    Args:
        sys (StateSpaceSystem): The model.
        n_times (int): Number of time points.
        rng (RandomSource): Generator or seed.
        initial_state (Optional[np.ndarray]): Fixed first state instead of a draw from N(a1, P1).

    Returns:
        Tuple[np.ndarray, np.ndarray]: States of shape (T, m) and observations of shape (n, T).
    """

    rng = np.random.default_rng(rng)
    m = sys.n_states
    state_factor = sys.noise_selector @ psd_factor(sys.state_cov)
    obs_factor = psd_factor(sys.obs_cov)

    states = np.zeros((n_times, m))
    if n_times == 0:
        return states, np.zeros((sys.n_obs, 0))

    if initial_state is None:
        states[0] = sys.init_mean + psd_factor(sys.init_cov) @ rng.standard_normal(m)
    else:
        states[0] = initial_state
    for t in range(1, n_times):
        states[t] = (
            sys.state_intercept + sys.transition @ states[t - 1] + state_factor @ rng.standard_normal(sys.n_noise)
        )

    noise = obs_factor @ rng.standard_normal((sys.n_obs, n_times))
    observations = sys.obs_matrix @ states.T + noise
    return states, observations


def simulation_smoother(
    sys: StateSpaceSystem, data: np.ndarray, rng: RandomSource = None, filt: Optional[FilterState] = None
) -> np.ndarray:
    """
    Draw alpha_1..alpha_T jointly from their distribution given the data.

    Uses mean correction: simulate (alpha+, y+) from the model with the data's missing
    pattern and return alpha+ plus the smoothed mean of y - y+ under the demeaned model.

    Args:
        sys (StateSpaceSystem): The model.
        data (np.ndarray): Observations, shape (n, T), NaN for missing entries.
        rng (RandomSource): Generator or seed.
        filt (Optional[FilterState]): Filter output on the same model and missing pattern, reused if given.

    Returns:
        np.ndarray: One state trajectory, shape (T, m).
    """

    data = as_observations(sys, data)
    if filt is None:
        filt = kalman_filter(sys, data)

    states_plus, observations_plus = simulate_system(sys, data.shape[1], rng)
    correction = smoothed_means(sys, filt, data - observations_plus, demeaned=True)
    return states_plus + correction


def log_likelihood(sys: StateSpaceSystem, data: np.ndarray, filt: Optional[FilterState] = None) -> float:
    """
    Gaussian log-likelihood by the prediction error decomposition, missing entries skipped.
    """

    if filt is None:
        filt = kalman_filter(sys, data)

    total = 0.0
    for nu, F, F_inv in zip(filt.innovations, filt.innovation_covs, filt.innovation_precisions):
        if nu.size == 0:
            continue
        _, logdet = np.linalg.slogdet(F)
        total -= 0.5 * (nu.size * np.log(2.0 * np.pi) + logdet + float(nu @ F_inv @ nu))
    return total
