"""
Causal estimands: the temporal average difference and the one-sided KS distance between
the observed and counterfactual posteriors of the trend partial sums.
"""

import itertools
from typing import Optional, Sequence

import numpy as np

from causal_ssm.causal.models import CounterfactualSet, DifferenceSummary
from causal_ssm.errors import ValidationError
from causal_ssm.mcmc.models import PosteriorDraws
from causal_ssm.panel.models import TimeSeriesPanel
from causal_ssm.state_space import simulate_system
from causal_ssm.structural import assemble_system, initial_moments


def _ks_sorted(sorted_a: np.ndarray, sorted_b: np.ndarray) -> float:
    pooled = np.concatenate([sorted_a, sorted_b])
    cdf_a = np.searchsorted(sorted_a, pooled, side="right") / sorted_a.size
    cdf_b = np.searchsorted(sorted_b, pooled, side="right") / sorted_b.size
    return float(max(np.max(cdf_a - cdf_b), 0.0))


def one_sided_ks(sample_a: np.ndarray, sample_b: np.ndarray) -> float:
    """
    One-sided Kolmogorov-Smirnov distance sup_x [F_a(x) - F_b(x)], floored at 0.

    The empirical distribution functions are right-continuous and the supremum is taken
    over the pooled sample points. The distance is 1 when every point of sample_a lies
    below every point of sample_b and 0 when sample_a dominates sample_b.

    Args:
        sample_a (np.ndarray): Sample whose distribution function is added.
        sample_b (np.ndarray): Sample whose distribution function is subtracted.

    Returns:
        float: The distance, in [0, 1].

    Raises:
        ValidationError: If a sample is empty.
    """

    sample_a = np.asarray(sample_a, dtype=float).ravel()
    sample_b = np.asarray(sample_b, dtype=float).ravel()
    if sample_a.size == 0 or sample_b.size == 0:
        raise ValidationError("One-sided KS distance needs two non-empty samples")
    return _ks_sorted(np.sort(sample_a), np.sort(sample_b))


def _check_sums(observed: Optional[np.ndarray], counterfactual: Sequence[np.ndarray]) -> None:
    shapes = {sums.shape[1:] for sums in counterfactual}
    if observed is not None:
        shapes.add(observed.shape[1:])
    if len(shapes) > 1:
        raise ValidationError(f"Trend sums disagree on (horizon, store) shape: {sorted(shapes)}")
    if any(sums.shape[0] == 0 for sums in counterfactual) or (observed is not None and observed.shape[0] == 0):
        raise ValidationError("Every fit needs at least one draw")


def ks_trajectories(observed: np.ndarray, counterfactual: Sequence[np.ndarray]) -> np.ndarray:
    """
    KS distance of every store at every horizon between the stacked counterfactual fits and the observed fit.

    Stacking equally sized draw sets is the same as averaging their distribution functions.

    Args:
        observed (np.ndarray): Trend partial sums of the observed data fit, shape (K, P, n).
        counterfactual (Sequence[np.ndarray]): Trend partial sums of every counterfactual fit, shape (K_j, P, n).

    Returns:
        np.ndarray: Distances, shape (n, P).
    """

    if not counterfactual:
        raise ValidationError("At least one counterfactual fit is required")
    _check_sums(observed, counterfactual)
    stacked = np.concatenate(list(counterfactual), axis=0)
    _, horizon, n = observed.shape
    distances = np.zeros((n, horizon))
    for i, m in itertools.product(range(n), range(horizon)):
        distances[i, m] = one_sided_ks(stacked[:, m, i], observed[:, m, i])
    return distances


def nearest_rank(values: np.ndarray, percentile: float) -> float:
    """
    Nearest rank percentile, the ceil(q N)-th smallest value.
    """

    ordered = np.sort(np.asarray(values, dtype=float).ravel())
    rank = max(int(np.ceil(percentile * ordered.size)), 1)
    return float(ordered[rank - 1])


def ks_thresholds(counterfactual: Sequence[np.ndarray], percentile: float = 0.95) -> np.ndarray:
    """
    Upper percentile of the one-sided distances between every ordered pair of counterfactual fits.

    Args:
        counterfactual (Sequence[np.ndarray]): Trend partial sums of the k fits, shape (K_j, P, n).
        percentile (float): Percentile in (0, 1].

    Returns:
        np.ndarray: Thresholds, shape (n, P).

    Raises:
        ValidationError: With fewer than two fits.
    """

    if len(counterfactual) < 2:
        raise ValidationError(f"Thresholds need at least two counterfactual fits, got {len(counterfactual)}")
    if not 0 < percentile <= 1:
        raise ValidationError(f"Percentile must lie in (0, 1], got {percentile}")
    _check_sums(None, counterfactual)
    _, horizon, n = counterfactual[0].shape
    pairs = list(itertools.permutations(range(len(counterfactual)), 2))
    thresholds = np.zeros((n, horizon))
    for i, m in itertools.product(range(n), range(horizon)):
        samples = [np.sort(sums[:, m, i]) for sums in counterfactual]
        distances = [_ks_sorted(samples[a], samples[b]) for a, b in pairs]
        thresholds[i, m] = nearest_rank(np.array(distances), percentile)
    return thresholds


def difference_estimand(observed: np.ndarray, counterfactual: np.ndarray, level: float = 0.95) -> DifferenceSummary:
    """
    Posterior summary of the running average of observed minus counterfactual values.

    Column m - 1 of every output summarises (1 / m) sum_{t <= m} (Y_obs_t - Y_cf_t). Missing
    observations are left out of the average.

    Args:
        observed (np.ndarray): Observations of the causal period, shape (n, P).
        counterfactual (np.ndarray): Counterfactual posterior draws, shape (K, n, P).
        level (float): Interval coverage.

    Returns:
        DifferenceSummary: Median and equal-tailed interval bounds, shape (n, P) each.
    """

    observed = np.atleast_2d(np.asarray(observed, dtype=float))
    if counterfactual.ndim != 3 or counterfactual.shape[1:] != observed.shape:
        raise ValidationError(f"Counterfactual draws of shape {counterfactual.shape} do not match {observed.shape}")
    valid = np.isfinite(observed)
    differences = np.where(valid, observed - counterfactual, 0.0)
    counts = np.cumsum(valid, axis=1)
    sums = np.cumsum(differences, axis=2)
    averages = np.divide(sums, counts, out=np.full(sums.shape, np.nan), where=counts > 0)
    tail = (1.0 - level) / 2.0
    lower, median, upper = np.quantile(averages, [tail, 0.5, 1.0 - tail], axis=0)
    return DifferenceSummary(median=median, lower=lower, upper=upper)


def _forecast(
    draws: PosteriorDraws, index: int, regression: np.ndarray, horizon: int, rng: np.random.Generator
) -> np.ndarray:
    spec = draws.spec
    init_mean, init_cov = initial_moments(spec)
    sys = assemble_system(spec, draws.component_params(index), init_mean, init_cov, validate=False)
    _, observations = simulate_system(sys, horizon + 1, rng, draws.final_states[index])
    return observations[:, 1:] + regression


def _causal_regression(draws: PosteriorDraws, panel: TimeSeriesPanel, horizon: int) -> np.ndarray:
    if horizon < 1:
        raise ValidationError("Forecast horizon must be at least 1")
    if panel.causal_start + horizon > panel.n_times:
        raise ValidationError(f"Horizon {horizon} runs past the end of the panel")
    if panel.n_series != draws.spec.n_series:
        raise ValidationError(f"Panel has {panel.n_series} series, draws have {draws.spec.n_series}")
    effect = panel.regression_effect(draws.beta)
    return effect[:, panel.causal_start : panel.causal_start + horizon]


def predictive_draws(
    draws: PosteriorDraws, panel: TimeSeriesPanel, rng: np.random.Generator, horizon: Optional[int] = None
) -> np.ndarray:
    """
    One counterfactual path of the causal period per posterior draw of the pre-period fit.

    Args:
        draws (PosteriorDraws): Draws of a chain run on the pre-period.
        panel (TimeSeriesPanel): Full panel, its controls cover the causal period.
        rng (np.random.Generator): Random generator.
        horizon (Optional[int]): Number of causal periods, the whole causal period when omitted.

    Returns:
        np.ndarray: Counterfactual observations, shape (K, n, P).
    """

    horizon = panel.horizon if horizon is None else horizon
    regression = _causal_regression(draws, panel, horizon)
    return np.stack([_forecast(draws, index, regression, horizon, rng) for index in range(draws.n_draws)])


def predict_counterfactuals(
    draws: PosteriorDraws, panel: TimeSeriesPanel, horizon: int, k: int, rng: np.random.Generator
) -> CounterfactualSet:
    """
    Draw k counterfactual datasets of the causal period from the posterior predictive.

    Every dataset picks a posterior draw of the last pre-period state and the parameters,
    iterates the state equation forward with fresh noise and adds fresh observation noise
    and the regression term X_t beta.

    Args:
        draws (PosteriorDraws): Draws of a chain run on the pre-period.
        panel (TimeSeriesPanel): Full panel, its controls cover the causal period.
        horizon (int): Number of causal periods.
        k (int): Number of datasets.
        rng (np.random.Generator): Random generator.

    Returns:
        CounterfactualSet: The k datasets and the draws they came from.
    """

    regression = _causal_regression(draws, panel, horizon)
    indices = rng.choice(draws.n_draws, size=k, replace=draws.n_draws < k)
    datasets = np.stack([_forecast(draws, int(index), regression, horizon, rng) for index in indices])
    return CounterfactualSet(datasets=datasets, draw_indices=np.asarray(indices))
