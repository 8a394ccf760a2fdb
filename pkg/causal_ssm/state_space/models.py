import dataclasses
from typing import List

import numpy as np

from causal_ssm.errors import ValidationError
from causal_ssm.linalg import check_psd


@dataclasses.dataclass
class StateSpaceSystem:
    """
    Represents a linear Gaussian state-space model

        y_t = z alpha_t + eps_t,                  eps_t ~ N(0, obs_cov)
        alpha_{t+1} = c + T alpha_t + R eta_t,    eta_t ~ N(0, state_cov)
        alpha_1 ~ N(init_mean, init_cov)

    Attributes:
        obs_matrix (np.ndarray): Observation matrix z, shape (n, m).
        state_intercept (np.ndarray): State intercept c, shape (m,).
        transition (np.ndarray): Transition matrix T, shape (m, m).
        noise_selector (np.ndarray): Noise selection matrix R, shape (m, q).
        obs_cov (np.ndarray): Observation noise covariance, shape (n, n).
        state_cov (np.ndarray): State noise covariance Q, shape (q, q).
        init_mean (np.ndarray): Mean of the first state, shape (m,).
        init_cov (np.ndarray): Covariance of the first state, shape (m, m).
    """

    obs_matrix: np.ndarray
    state_intercept: np.ndarray
    transition: np.ndarray
    noise_selector: np.ndarray
    obs_cov: np.ndarray
    state_cov: np.ndarray
    init_mean: np.ndarray
    init_cov: np.ndarray

    def __post_init__(self) -> None:
        self.obs_matrix = np.atleast_2d(np.asarray(self.obs_matrix, dtype=float))
        self.state_intercept = np.atleast_1d(np.asarray(self.state_intercept, dtype=float))
        self.transition = np.atleast_2d(np.asarray(self.transition, dtype=float))
        self.noise_selector = np.atleast_2d(np.asarray(self.noise_selector, dtype=float))
        self.obs_cov = np.atleast_2d(np.asarray(self.obs_cov, dtype=float))
        self.state_cov = np.atleast_2d(np.asarray(self.state_cov, dtype=float))
        self.init_mean = np.atleast_1d(np.asarray(self.init_mean, dtype=float))
        self.init_cov = np.atleast_2d(np.asarray(self.init_cov, dtype=float))

        n, m = self.obs_matrix.shape
        q = self.noise_selector.shape[1]
        expected = {
            "state_intercept": (m,),
            "transition": (m, m),
            "noise_selector": (m, q),
            "obs_cov": (n, n),
            "state_cov": (q, q),
            "init_mean": (m,),
            "init_cov": (m, m),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ValidationError(f"{name} has shape {actual}, expected {shape}")

        check_psd("obs_cov", self.obs_cov)
        check_psd("state_cov", self.state_cov)
        check_psd("init_cov", self.init_cov)

    @property
    def n_obs(self) -> int:
        return int(self.obs_matrix.shape[0])

    @property
    def n_states(self) -> int:
        return int(self.obs_matrix.shape[1])

    @property
    def n_noise(self) -> int:
        return int(self.noise_selector.shape[1])

    @property
    def state_noise_cov(self) -> np.ndarray:
        """
        The state noise covariance mapped to the state space, R Q R'.
        """

        return self.noise_selector @ self.state_cov @ self.noise_selector.T


@dataclasses.dataclass
class FilterState:
    """
    Output of the Kalman filter in predictive form.

    Per-time quantities are lists because the number of observed series changes
    with the missing pattern. At fully missing times the innovation entries are
    empty arrays and the companion matrix equals the transition.

    Attributes:
        observed (np.ndarray): Boolean mask of observed entries, shape (T, n).
        innovations (List[np.ndarray]): nu_t over the observed rows.
        innovation_covs (List[np.ndarray]): F_t over the observed rows.
        innovation_precisions (List[np.ndarray]): F_t inverse.
        gains (List[np.ndarray]): K_t = T P_t z_t' F_t^-1, shape (m, n_t).
        companions (np.ndarray): L_t = T - K_t z_t, shape (T, m, m).
        predicted_means (np.ndarray): a_t = E[alpha_t | y_1..y_{t-1}], shape (T + 1, m).
        predicted_covs (np.ndarray): P_t, shape (T + 1, m, m).
        filtered_means (np.ndarray): E[alpha_t | y_1..y_t], shape (T, m).
        filtered_covs (np.ndarray): Var[alpha_t | y_1..y_t], shape (T, m, m).
    """

    observed: np.ndarray
    innovations: List[np.ndarray]
    innovation_covs: List[np.ndarray]
    innovation_precisions: List[np.ndarray]
    gains: List[np.ndarray]
    companions: np.ndarray
    predicted_means: np.ndarray
    predicted_covs: np.ndarray
    filtered_means: np.ndarray
    filtered_covs: np.ndarray

    @property
    def n_times(self) -> int:
        return int(self.observed.shape[0])

    @property
    def missing_times(self) -> np.ndarray:
        return np.flatnonzero(~self.observed.any(axis=1))


@dataclasses.dataclass
class SmoothedMoments:
    """
    Conditional state moments given the whole sample.

    Attributes:
        smoothed_means (np.ndarray): a_{t|T}, shape (T, m).
        smoothed_covs (np.ndarray): P_{t|T}, shape (T, m, m).
        lag_one_covs (np.ndarray): Cov(alpha_t, alpha_{t+1} | Y), shape (T - 1, m, m).
        second_moments (np.ndarray): E[alpha_t alpha_t' | Y], shape (T, m, m).
        cross_moments (np.ndarray): E[alpha_{t+1} alpha_t' | Y], shape (T - 1, m, m).
    """

    smoothed_means: np.ndarray
    smoothed_covs: np.ndarray
    lag_one_covs: np.ndarray
    second_moments: np.ndarray = dataclasses.field(init=False)
    cross_moments: np.ndarray = dataclasses.field(init=False)

    def __post_init__(self) -> None:
        means = self.smoothed_means
        self.second_moments = self.smoothed_covs + np.einsum("ti,tj->tij", means, means)
        self.cross_moments = np.transpose(self.lag_one_covs, (0, 2, 1)) + np.einsum(
            "ti,tj->tij", means[1:], means[:-1]
        )

    @property
    def n_times(self) -> int:
        return int(self.smoothed_means.shape[0])
