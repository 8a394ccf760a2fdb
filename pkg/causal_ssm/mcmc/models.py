import dataclasses
from typing import Dict, List, Optional, Tuple

import numpy as np

from causal_ssm.errors import ValidationError
from causal_ssm.graph.adjacency import validate_adjacency
from causal_ssm.linalg import min_eigenvalue
from causal_ssm.structural.models import ComponentParams, CovariancePriors, StructuralSpec


@dataclasses.dataclass
class GWishartPrior:
    """
    G-Wishart prior W_G(df, multiplier * scale) of one precision matrix.

    Attributes:
        df (float): Degrees of freedom nu.
        scale (np.ndarray): Base scale H, shape (n, n).
        adjacency (np.ndarray): Store graph.
        multiplier (float): Scale multiplier, 1 for sigma and k^2 (n + 1) for the state noise blocks.
    """

    df: float
    scale: np.ndarray
    adjacency: np.ndarray
    multiplier: float = 1.0

    def __post_init__(self) -> None:
        self.scale = np.atleast_2d(np.asarray(self.scale, dtype=float))
        self.adjacency = validate_adjacency(self.adjacency)
        if self.df <= 0:
            raise ValidationError(f"G-Wishart degrees of freedom must be positive, got {self.df}")
        if self.multiplier <= 0:
            raise ValidationError(f"Scale multiplier must be positive, got {self.multiplier}")
        if self.scale.shape != self.adjacency.shape:
            raise ValidationError(f"Scale has shape {self.scale.shape}, graph has {self.adjacency.shape[0]} nodes")
        if min_eigenvalue(self.scale) <= 0:
            raise ValidationError("G-Wishart scale must be positive definite")

    def posterior(self, scatter: np.ndarray, n_obs: int) -> Tuple[float, np.ndarray]:
        """
        Posterior degrees of freedom and scale after n_obs residuals with the given scatter.
        """

        return self.df + n_obs, self.multiplier * self.scale + scatter

    @staticmethod
    def from_priors(priors: CovariancePriors, adjacency: np.ndarray) -> List["GWishartPrior"]:
        """
        Priors of sigma, sigma_u, sigma_v and sigma_w, in that order.
        """

        n = adjacency.shape[0]
        scale = priors.scale_matrix(n)
        multipliers = [1.0] + [k**2 * (n + 1) for k in (priors.k1, priors.k2, priors.k3)]
        return [GWishartPrior(priors.df, scale, adjacency, multiplier) for multiplier in multipliers]


@dataclasses.dataclass
class McmcConfig:
    """
    Configuration of the Gibbs sampler.

    Attributes:
        n_iters (int): Total number of sweeps, burn-in included.
        n_burnin (int): Sweeps discarded at the start of the chain.
        thinning (int): Keep one sweep out of this many after burn-in.
        proposal_scale (float): Random walk standard deviation of every slope parameter.
        proposal_scales (Optional[List[float]]): Per-parameter standard deviations, overriding proposal_scale.
        reflect_flip_probability (float): Probability of proposing a flip of the reflection flag.
        adapt (bool): Tune the proposal scale during burn-in.
        target_acceptance (float): Acceptance rate the tuning aims at.
        phi_prior_variance (float): Variance of the normal prior on every slope parameter.
        d_prior_variance (float): Variance of the normal prior on every entry of D.
        init_variance (float): Diagonal of the first state covariance on trend, slope and season.
        allow_nondecomposable (bool): Enable the completion sampler for graphs without a perfect clique sequence.
        seed (Optional[int]): Root seed of the chain.
    """

    n_iters: int = 10000
    n_burnin: int = 2000
    thinning: int = 1
    proposal_scale: float = 0.1
    proposal_scales: Optional[List[float]] = None
    reflect_flip_probability: float = 0.5
    adapt: bool = True
    target_acceptance: float = 0.25
    phi_prior_variance: float = 5.0
    d_prior_variance: float = 1.0
    init_variance: float = 1.0
    allow_nondecomposable: bool = False
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n_iters < 1:
            raise ValidationError("At least one sweep is required")
        if not 0 <= self.n_burnin < self.n_iters:
            raise ValidationError(f"Burn-in {self.n_burnin} must lie in [0, {self.n_iters})")
        if self.thinning < 1:
            raise ValidationError("Thinning must be at least 1")
        if self.proposal_scale < 0 or (self.proposal_scales is not None and min(self.proposal_scales) < 0):
            raise ValidationError("Proposal scales must be non-negative")
        if not 0 <= self.reflect_flip_probability <= 1:
            raise ValidationError("Flip probability must lie in [0, 1]")
        if not 0 < self.target_acceptance < 1:
            raise ValidationError("Target acceptance must lie in (0, 1)")
        for name in ("phi_prior_variance", "d_prior_variance", "init_variance"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")

    @property
    def n_kept(self) -> int:
        return len(range(self.n_burnin, self.n_iters, self.thinning))

    def scales(self, n_free: int) -> np.ndarray:
        if self.proposal_scales is None:
            return np.full(n_free, self.proposal_scale)
        if len(self.proposal_scales) != n_free:
            raise ValidationError(f"Expected {n_free} proposal scales, got {len(self.proposal_scales)}")
        return np.asarray(self.proposal_scales, dtype=float)


@dataclasses.dataclass
class PosteriorDraws:
    """
    Retained sweeps of a chain.

    Attributes:
        spec (StructuralSpec): Model the chain was run on.
        beta (np.ndarray): Regression coefficients held fixed during the chain.
        phi (np.ndarray): Slope coefficient draws, shape (K, n, n).
        d (np.ndarray): Long run slope level draws, shape (K, n).
        sigma (np.ndarray): Observation covariance draws, shape (K, n, n).
        sigma_u (np.ndarray): Trend covariance draws, shape (K, n, n).
        sigma_v (np.ndarray): Slope covariance draws, shape (K, n, n).
        sigma_w (np.ndarray): Seasonal covariance draws, shape (K, n, n).
        reflect (np.ndarray): Reflection flag draws, shape (K,).
        final_states (np.ndarray): Draws of the last state, shape (K, m).
        state_mean (np.ndarray): Posterior mean of the state trajectory, shape (T, m).
        trends (np.ndarray): Trend draws from trend_start onwards, shape (K, P, n).
        trend_start (int): First time index of the stored trends.
        accepted (int): Accepted slope proposals, burn-in included.
        proposed (int): Slope proposals made, burn-in included.
    """

    spec: StructuralSpec
    beta: np.ndarray
    phi: np.ndarray
    d: np.ndarray
    sigma: np.ndarray
    sigma_u: np.ndarray
    sigma_v: np.ndarray
    sigma_w: np.ndarray
    reflect: np.ndarray
    final_states: np.ndarray
    state_mean: np.ndarray
    trends: np.ndarray
    trend_start: int = 0
    accepted: int = 0
    proposed: int = 0

    @property
    def n_draws(self) -> int:
        return int(self.d.shape[0])

    @property
    def acceptance_rate(self) -> float:
        if self.proposed == 0:
            return float("nan")
        return self.accepted / self.proposed

    def component_params(self, index: int) -> ComponentParams:
        return ComponentParams(
            sigma=self.sigma[index],
            sigma_u=self.sigma_u[index],
            sigma_v=self.sigma_v[index],
            sigma_w=self.sigma_w[index],
            phi=self.phi[index],
            d=self.d[index],
        )

    def trend_partial_sums(self) -> np.ndarray:
        """
        Cumulative trend sums over the stored horizon, shape (K, P, n).
        """

        return np.cumsum(self.trends, axis=1)

    def traces(self) -> Dict[str, np.ndarray]:
        """
        One chain per scalar parameter, keyed by a readable name.

        The set covers the last trend of every series, D, Phi and the upper triangle of every covariance.
        """

        n = self.spec.n_series
        traces = {f"mu[{i}]": self.final_states[:, i] for i in range(n)}
        traces.update({f"d[{i}]": self.d[:, i] for i in range(n)})
        traces.update({f"phi[{i},{j}]": self.phi[:, i, j] for i in range(n) for j in range(n)})
        for name in ("sigma", "sigma_u", "sigma_v", "sigma_w"):
            draws = getattr(self, name)
            traces.update({f"{name}[{i},{j}]": draws[:, i, j] for i in range(n) for j in range(i, n)})
        return traces
