import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.stats import ks_2samp

from causal_ssm.causal import (
    CounterfactualSet,
    difference_estimand,
    ks_thresholds,
    ks_trajectories,
    nearest_rank,
    one_sided_ks,
    predict_counterfactuals,
    predictive_draws,
)
from causal_ssm.errors import ValidationError
from causal_ssm.mcmc import PosteriorDraws
from causal_ssm.structural import StructuralSpec, assemble_system, initial_moments
from tests.oracles import make_panel


def test_one_sided_ks_examples() -> None:
    assert one_sided_ks([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert one_sided_ks([1.0, 2.0, 3.0], [11.0, 12.0, 13.0]) == 1.0
    assert one_sided_ks([11.0, 12.0, 13.0], [1.0, 2.0, 3.0]) == 0.0
    assert one_sided_ks([1.0, 3.0], [2.0, 4.0]) == pytest.approx(0.5)


def test_one_sided_ks_rejects_empty_samples() -> None:
    with pytest.raises(ValidationError):
        one_sided_ks([], [1.0])


def test_one_sided_ks_matches_scipy() -> None:
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = rng.normal(size=int(rng.integers(1, 40)))
        b = rng.normal(0.3, 1.0, size=int(rng.integers(1, 40)))
        expected = ks_2samp(a, b, alternative="greater", method="asymp").statistic
        assert one_sided_ks(a, b) == pytest.approx(expected, abs=1e-12)


def test_one_sided_ks_bounds() -> None:
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        a = rng.integers(0, 5, size=int(rng.integers(1, 8)))
        b = rng.integers(0, 5, size=int(rng.integers(1, 8)))
        distance = one_sided_ks(a, b)
        assert 0.0 <= distance <= 1.0
        assert one_sided_ks(a, a) == 0.0


@pytest.mark.parametrize("shift", [0.1, 1.0, 10.0])
def test_shifting_the_second_sample_up_never_decreases_the_distance(shift: float) -> None:
    rng = np.random.default_rng(2)
    for _ in range(200):
        a = rng.normal(size=20)
        b = rng.normal(size=15)
        assert one_sided_ks(a, b + shift) >= one_sided_ks(a, b)


def test_nearest_rank() -> None:
    assert nearest_rank(np.array([0.2, 0.1]), 0.95) == 0.2
    assert nearest_rank(np.array([0.2, 0.1]), 0.5) == 0.1
    assert nearest_rank(np.arange(1.0, 21.0), 0.95) == 19.0
    assert nearest_rank(np.array([0.4]), 0.01) == 0.4


def trend_sums(rng: np.random.Generator, n_draws: int, shift: float = 0.0) -> np.ndarray:
    return rng.normal(shift, 1.0, (n_draws, 4, 2))


def test_trajectories_vanish_for_identical_fits() -> None:
    sums = trend_sums(np.random.default_rng(3), 50)

    distances = ks_trajectories(sums, [sums, sums.copy()])

    assert distances.shape == (2, 4)
    assert_array_equal(distances, 0.0)


def test_trajectories_separate_shifted_fits() -> None:
    rng = np.random.default_rng(4)
    counterfactual = [trend_sums(rng, 50) for _ in range(3)]
    observed = trend_sums(rng, 50)
    observed[:, 2, 1] += 100.0

    distances = ks_trajectories(observed, counterfactual)

    assert distances[1, 2] == 1.0
    assert np.all(distances[:, [0, 1, 3]] < 1.0)


def test_trajectories_reject_misaligned_fits() -> None:
    rng = np.random.default_rng(5)
    with pytest.raises(ValidationError):
        ks_trajectories(trend_sums(rng, 10), [rng.normal(size=(10, 3, 2))])


def test_thresholds_of_identical_fits() -> None:
    sums = trend_sums(np.random.default_rng(6), 30)

    assert_array_equal(ks_thresholds([sums, sums, sums]), 0.0)


def test_thresholds_of_two_fits() -> None:
    low = np.zeros((5, 1, 1))
    high = np.ones((5, 1, 1))

    assert ks_thresholds([low, high], 0.95)[0, 0] == 1.0
    assert ks_thresholds([low, high], 0.5)[0, 0] == 0.0


def test_thresholds_need_two_fits() -> None:
    with pytest.raises(ValidationError):
        ks_thresholds([np.zeros((5, 1, 1))])


def test_thresholds_ignore_fit_order() -> None:
    rng = np.random.default_rng(7)
    fits = [trend_sums(rng, 40, shift) for shift in (0.0, 0.2, 0.5, 1.0)]

    expected = ks_thresholds(fits)
    for order in itertools.islice(itertools.permutations(range(4)), 6):
        assert_array_equal(ks_thresholds([fits[i] for i in order]), expected)
    assert np.all((expected >= 0.0) & (expected <= 1.0))


def test_difference_of_a_shift() -> None:
    rng = np.random.default_rng(8)
    counterfactual = rng.normal(size=(4000, 2, 5))
    observed = np.zeros((2, 5))

    summary = difference_estimand(observed + 3.0, counterfactual)
    baseline = difference_estimand(observed, counterfactual)

    assert_allclose(summary.median, 3.0, atol=0.1)
    assert_allclose(summary.median - baseline.median, 3.0, atol=1e-12)
    assert np.all(summary.lower < summary.median)
    assert np.all(summary.median < summary.upper)
    assert np.all(summary.detected)
    assert not np.any(baseline.detected[:, -1])


def test_difference_averages_over_the_window() -> None:
    counterfactual = np.zeros((3, 1, 4))
    observed = np.array([[1.0, 3.0, np.nan, 4.0]])

    summary = difference_estimand(observed, counterfactual)

    assert_allclose(summary.median[0], [1.0, 2.0, 2.0, 8.0 / 3.0])


def test_difference_rejects_misaligned_draws() -> None:
    with pytest.raises(ValidationError):
        difference_estimand(np.zeros((2, 5)), np.zeros((10, 2, 4)))


def fixed_draws(spec: StructuralSpec, final_state: np.ndarray, noise: float, beta: np.ndarray) -> PosteriorDraws:
    n = spec.n_series
    covariance = noise * np.eye(n)[np.newaxis]
    return PosteriorDraws(
        spec=spec,
        beta=beta,
        phi=np.eye(n)[np.newaxis],
        d=np.zeros((1, n)),
        sigma=covariance,
        sigma_u=covariance,
        sigma_v=covariance,
        sigma_w=covariance,
        reflect=np.zeros(1, dtype=int),
        final_states=final_state[np.newaxis],
        state_mean=np.zeros((10, spec.state_dim)),
        trends=np.zeros((1, 0, n)),
    )


def forecast_panel(n_times: int = 10, causal_start: int = 6):
    controls = [np.arange(n_times, dtype=float).reshape(1, -1), np.ones((1, n_times))]
    return make_panel(np.zeros((2, n_times)), controls, causal_start)


def test_noiseless_forecast_is_deterministic() -> None:
    spec = StructuralSpec(n_series=2, seasonal_period=3)
    final_state = np.zeros(spec.state_dim)
    final_state[spec.block(0)] = [1.0, -2.0]
    final_state[spec.block(1)] = [0.5, 0.25]
    draws = fixed_draws(spec, final_state, 0.0, np.array([2.0, 3.0]))
    panel = forecast_panel()

    counterfactual = predict_counterfactuals(draws, panel, 4, 2, np.random.default_rng(9))

    steps = np.arange(1, 5)
    expected = np.stack([1.0 + 0.5 * steps + 2.0 * np.arange(6, 10), -2.0 + 0.25 * steps + 3.0])
    assert isinstance(counterfactual, CounterfactualSet)
    assert counterfactual.k == 2
    assert counterfactual.horizon == 4
    assert_allclose(counterfactual.datasets[0], expected, atol=1e-12)
    assert_allclose(counterfactual.datasets[1], expected, atol=1e-12)


def test_counterfactuals_are_reproducible() -> None:
    spec = StructuralSpec(n_series=2, seasonal_period=3)
    draws = fixed_draws(spec, np.ones(spec.state_dim), 0.5, np.array([1.0, 1.0]))
    panel = forecast_panel()

    first = predict_counterfactuals(draws, panel, 4, 2, np.random.default_rng(10))
    second = predict_counterfactuals(draws, panel, 4, 2, np.random.default_rng(10))

    assert_array_equal(first.datasets, second.datasets)
    assert not np.array_equal(first.datasets[0], first.datasets[1])


def test_one_step_predictive_moments() -> None:
    spec = StructuralSpec(n_series=2, seasonal_period=3)
    rng = np.random.default_rng(11)
    draws = fixed_draws(spec, rng.normal(size=spec.state_dim), 0.3, np.array([0.5, -1.0]))
    panel = forecast_panel()
    sys = assemble_system(spec, draws.component_params(0), *initial_moments(spec), validate=False)

    counterfactual = predict_counterfactuals(draws, panel, 1, 10_000, rng)

    regression = np.array([0.5 * 6.0, -1.0])
    expected = sys.obs_matrix @ (sys.state_intercept + sys.transition @ draws.final_states[0]) + regression
    state_noise = sys.noise_selector @ sys.state_cov @ sys.noise_selector.T
    variance = np.diag(sys.obs_matrix @ state_noise @ sys.obs_matrix.T + sys.obs_cov)
    mean = counterfactual.datasets[:, :, 0].mean(axis=0)
    assert np.all(np.abs(mean - expected) < 4.0 * np.sqrt(variance / 10_000))


def test_forecast_horizon_is_checked() -> None:
    spec = StructuralSpec(n_series=2, seasonal_period=3)
    draws = fixed_draws(spec, np.zeros(spec.state_dim), 0.1, np.zeros(2))
    panel = forecast_panel()

    with pytest.raises(ValidationError):
        predict_counterfactuals(draws, panel, 0, 2, np.random.default_rng(12))
    with pytest.raises(ValidationError):
        predict_counterfactuals(draws, panel, 5, 2, np.random.default_rng(12))
    with pytest.raises(ValidationError):
        predict_counterfactuals(draws, panel, 4, 1, np.random.default_rng(12))


def test_predictive_draws_cover_the_causal_period() -> None:
    spec = StructuralSpec(n_series=2, seasonal_period=3)
    draws = fixed_draws(spec, np.zeros(spec.state_dim), 0.1, np.zeros(2))

    paths = predictive_draws(draws, forecast_panel(), np.random.default_rng(13))

    assert paths.shape == (1, 2, 4)
