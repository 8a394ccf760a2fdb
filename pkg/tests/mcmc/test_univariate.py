import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from causal_ssm.mcmc import McmcConfig, combine_univariate, run_univariate_arm, run_univariate_chain
from causal_ssm.mcmc.univariate import sample_phi_truncated
from causal_ssm.structural import SlopeMode, StructuralSpec, univariate_priors
from tests.oracles import make_panel


def seasonal_series(rng: np.random.Generator, n_times: int) -> np.ndarray:
    trend = np.cumsum(rng.normal(0.0, 0.05, n_times))
    season = 0.2 * np.cos(2 * np.pi * np.arange(n_times) / 4)
    return trend + season + rng.normal(0.0, 0.3, n_times)


def test_truncated_phi_stays_stationary() -> None:
    rng = np.random.default_rng(0)
    explosive = 1.05 ** np.arange(50)
    draws = [sample_phi_truncated(explosive, 0.0, 0.01, rng, 0.01) for _ in range(100)]

    assert np.all(np.abs(draws) < 1.0)


def test_truncated_phi_concentrates_on_the_truth() -> None:
    rng = np.random.default_rng(1)
    slope = np.zeros(2000)
    for t in range(1, slope.size):
        slope[t] = 0.7 * slope[t - 1] + rng.normal(0.0, 0.1)

    assert abs(sample_phi_truncated(slope, 0.0, 0.01, rng, 0.01) - 0.7) < 0.05


def test_univariate_chain_shapes() -> None:
    rng = np.random.default_rng(3)
    series = seasonal_series(rng, 40)
    series[5] = np.nan
    config = McmcConfig(n_iters=20, n_burnin=10)

    draws = run_univariate_chain(series, 4, SlopeMode.STATIONARY, univariate_priors(series), config, rng, 30)

    assert draws.n_draws == 10
    assert draws.trends.shape == (10, 10, 1)
    assert draws.final_states.shape == (10, 5)
    assert np.all(np.abs(draws.phi) < 1.0)
    for name in ("sigma", "sigma_u", "sigma_v", "sigma_w"):
        assert np.all(getattr(draws, name) > 0)


def test_random_walk_univariate_chain() -> None:
    rng = np.random.default_rng(4)
    series = seasonal_series(rng, 30)
    config = McmcConfig(n_iters=5, n_burnin=0)

    draws = run_univariate_chain(series, 4, SlopeMode.RANDOM_WALK, univariate_priors(series), config, rng)

    assert_array_equal(draws.phi, 1.0)
    assert_array_equal(draws.d, 0.0)
    assert draws.trends.shape == (5, 0, 1)


def test_combined_layout_is_block_major() -> None:
    rng = np.random.default_rng(5)
    config = McmcConfig(n_iters=6, n_burnin=2)
    series = [seasonal_series(rng, 30) for _ in range(3)]
    fits = [
        run_univariate_chain(row, 4, SlopeMode.STATIONARY, univariate_priors(row), config, rng, 25) for row in series
    ]
    spec = StructuralSpec(n_series=3, seasonal_period=4)

    combined = combine_univariate(fits, spec, np.zeros(0))

    assert combined.final_states.shape == (4, spec.state_dim)
    for i, fit in enumerate(fits):
        for block in range(5):
            assert_array_equal(combined.final_states[:, block * 3 + i], fit.final_states[:, block])
            assert_array_equal(combined.state_mean[:, block * 3 + i], fit.state_mean[:, block])
        assert_array_equal(combined.sigma[:, i, i], fit.sigma[:, 0, 0])
        assert_array_equal(combined.trends[:, :, i], fit.trends[:, :, 0])
    assert_array_equal(combined.sigma[:, 0, 1], 0.0)


def test_univariate_arm_on_a_panel() -> None:
    rng = np.random.default_rng(6)
    n_times = 30
    controls = [rng.normal(size=(2, n_times)) for _ in range(2)]
    observed = np.stack([seasonal_series(rng, n_times) + block[0] for block in controls])
    panel = make_panel(observed, controls)
    spec = StructuralSpec(n_series=2, seasonal_period=4)

    draws = run_univariate_arm(panel, spec, np.array([1.0, 0.0, 1.0, 0.0]), McmcConfig(n_iters=4, n_burnin=1), rng)

    assert draws.n_draws == 3
    assert draws.spec.n_series == 2
    assert_allclose(draws.beta, [1.0, 0.0, 1.0, 0.0])
    assert_array_equal(draws.sigma_u[:, 0, 1], 0.0)
