import dataclasses

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.optimize import minimize_scalar

from causal_ssm.emvs import (
    EmvsState,
    EmvsVariant,
    SpikeSlabConfig,
    e_step_gamma,
    m_step_beta,
    m_step_phi,
    m_step_sigma,
    m_step_state_cov,
    m_step_theta,
    path_rows,
    run_emvs,
    select_coefficients,
    selection_threshold,
    v0_grid_scan,
    write_path_table,
)
from causal_ssm.emvs.selector import complete_missing, theta_objective
from causal_ssm.errors import ValidationError
from causal_ssm.graph import complete_adjacency, path_adjacency
from causal_ssm.logger import Logger
from causal_ssm.state_space import SmoothedMoments
from causal_ssm.structural import CovariancePriors, StructuralSpec
from tests.oracles import make_panel

TRUE_BETA = [np.array([1.5, 0.0, 0.0]), np.array([0.0, 2.0, 0.0])]


def synthetic_panel(seed: int, n_times: int = 60, missing: bool = False):
    rng = np.random.default_rng(seed)
    controls = []
    for _ in TRUE_BETA:
        block = np.zeros((3, n_times))
        block[:, 0] = rng.standard_normal(3)
        for t in range(1, n_times):
            block[:, t] = 0.6 * block[:, t - 1] + rng.standard_normal(3)
        controls.append(block)
    trend = 1.0 + np.cumsum(rng.normal(0.0, 0.05, (2, n_times)), axis=1)
    season = 0.1 * np.cos(2 * np.pi * np.arange(n_times) / 7)
    regression = np.stack([beta @ block for beta, block in zip(TRUE_BETA, controls)])
    observed = trend + season + regression + rng.normal(0.0, 0.3, (2, n_times))
    if missing:
        observed[0, 5] = np.nan
        observed[:, 17] = np.nan
    return make_panel(observed, controls)


def zero_moments(n_times: int, m: int) -> SmoothedMoments:
    return SmoothedMoments(
        smoothed_means=np.zeros((n_times, m)),
        smoothed_covs=np.zeros((n_times, m, m)),
        lag_one_covs=np.zeros((n_times - 1, m, m)),
    )


def test_inclusion_weight_at_zero() -> None:
    weights, precisions = e_step_gamma(np.zeros(3), 0.5, 0.25, 4.0)

    assert_allclose(weights, 0.2, atol=1e-4)
    assert_allclose(precisions, 0.8 / 0.25 + 0.2 / 4.0)


def test_equal_variances_return_theta() -> None:
    weights, precisions = e_step_gamma(np.array([-3.0, 0.0, 0.5]), 0.3, 2.0, 2.0)

    assert_allclose(weights, 0.3)
    assert_allclose(precisions, 0.5)


def test_weight_endpoints() -> None:
    weights, precisions = e_step_gamma(np.array([0.1, 1.0]), 0.0, 0.01, 10.0)
    assert_array_equal(weights, 0.0)
    assert_allclose(precisions, 100.0)

    weights, precisions = e_step_gamma(np.array([0.1, 1.0]), 1.0, 0.01, 10.0)
    assert_array_equal(weights, 1.0)
    assert_allclose(precisions, 0.1)


def test_tiny_spike_does_not_underflow() -> None:
    weights, precisions = e_step_gamma(np.array([0.0, 0.5, 5.0]), 0.5, 1e-6, 10.0, temperature=0.1)

    assert np.all(np.isfinite(weights))
    assert np.all((weights >= 0) & (weights <= 1))
    assert np.all((precisions >= 0.1) & (precisions <= 1e6))
    assert weights[2] > weights[0]


def test_untempered_weights_are_default() -> None:
    beta = np.random.default_rng(0).normal(0, 1, 10)

    assert_array_equal(e_step_gamma(beta, 0.4, 0.01, 10.0, 1.0)[0], e_step_gamma(beta, 0.4, 0.01, 10.0)[0])


def test_theta_update_examples() -> None:
    assert m_step_theta(np.full(10, 0.5), 1.0, 1.0) == pytest.approx(0.5)
    assert m_step_theta(np.zeros(10), 1.0, 1.0) == 0.0
    assert m_step_theta(np.array([0.2, 0.7, 0.9]), 2.0, 3.0) == pytest.approx(2.8 / 6.0)


def test_theta_update_is_the_maximiser() -> None:
    rng = np.random.default_rng(1)
    for _ in range(20):
        weights = rng.uniform(0, 1, 8)
        zeta1, zeta2 = rng.uniform(1, 4, 2)
        best = minimize_scalar(
            lambda theta, w=weights, a=zeta1, b=zeta2: -theta_objective(theta, w, a, b),
            bounds=(1e-9, 1 - 1e-9),
            method="bounded",
            options={"xatol": 1e-10},
        )
        assert m_step_theta(weights, zeta1, zeta2) == pytest.approx(best.x, abs=1e-6)


def test_theta_update_degenerate_prior() -> None:
    with pytest.raises(ValidationError):
        m_step_theta(np.zeros(0), 1.0, 1.0)


def test_beta_update_without_regressors() -> None:
    designs = np.zeros((5, 2, 3))
    targets = np.ones((2, 5))

    assert_array_equal(m_step_beta(designs, targets, np.eye(2), np.ones(3)), 0.0)


def test_beta_update_scalar() -> None:
    rng = np.random.default_rng(2)
    x = rng.normal(size=8)
    target = rng.normal(size=8)
    sigma2, a_star = 0.5, 2.0

    beta = m_step_beta(x[:, None, None], target[None, :], np.array([[sigma2]]), np.array([a_star]))

    assert beta[0] == pytest.approx((x @ target / sigma2) / (x @ x / sigma2 + a_star))


def test_woodbury_matches_direct_inverse() -> None:
    rng = np.random.default_rng(3)
    for p in (20, 50):
        designs = rng.normal(size=(10, 5, p))
        targets = rng.normal(size=(5, 10))
        factor = rng.normal(size=(5, 5))
        sigma = factor @ factor.T / 5 + 0.5 * np.eye(5)
        weights = rng.uniform(0.1, 100.0, p)

        direct = m_step_beta(designs, targets, sigma, weights, woodbury=False)
        woodbury = m_step_beta(designs, targets, sigma, weights, woodbury=True)

        assert_allclose(woodbury, direct, atol=1e-8)


def test_beta_update_zeroes_the_gradient() -> None:
    rng = np.random.default_rng(4)
    designs = rng.normal(size=(12, 3, 6))
    targets = rng.normal(size=(3, 12))
    sigma = np.diag([0.5, 1.0, 2.0])
    weights = rng.uniform(0.1, 10.0, 6)
    beta = m_step_beta(designs, targets, sigma, weights)

    precision = np.linalg.inv(sigma)
    gradient = sum(designs[t].T @ precision @ (targets[:, t] - designs[t] @ beta) for t in range(12)) - weights * beta

    assert np.abs(gradient).max() < 1e-8


def test_phi_update_with_zero_moments() -> None:
    phi = m_step_phi(zero_moments(5, 6), slice(2, 4), np.eye(2))

    assert_array_equal(phi, 0.0)


def test_phi_update_scalar() -> None:
    rng = np.random.default_rng(5)
    means = rng.normal(size=(6, 2))
    moments = SmoothedMoments(
        smoothed_means=means,
        smoothed_covs=np.tile(0.1 * np.eye(2), (6, 1, 1)),
        lag_one_covs=np.tile(0.05 * np.eye(2), (5, 1, 1)),
    )
    sigma_v = 0.3
    phi = m_step_phi(moments, slice(1, 2), np.array([[sigma_v]]))

    second = moments.second_moments[:-1, 1, 1].sum()
    cross = moments.cross_moments[:, 1, 1].sum()
    assert phi[0, 0] == pytest.approx((cross / sigma_v) / (second / sigma_v + 10.0))


def test_phi_update_solves_the_normal_equations() -> None:
    rng = np.random.default_rng(6)
    states = rng.normal(size=(9, 4))
    moments = SmoothedMoments(
        smoothed_means=states,
        smoothed_covs=np.tile(0.2 * np.eye(4), (9, 1, 1)),
        lag_one_covs=np.tile(0.1 * np.eye(4), (8, 1, 1)),
    )
    sigma_v = np.array([[0.5, 0.1], [0.1, 0.3]])
    phi = m_step_phi(moments, slice(2, 4), sigma_v)

    precision = np.linalg.inv(sigma_v)
    second = moments.second_moments[:-1, 2:4, 2:4].sum(axis=0)
    cross = moments.cross_moments[:, 2:4, 2:4].sum(axis=0)
    residual = precision @ phi @ second + 10.0 * phi - precision @ cross

    assert np.abs(residual).max() < 1e-10


def test_sigma_update_is_the_prior_scale_without_residuals() -> None:
    sigma = m_step_sigma(np.zeros((3, 3)), 2, CovariancePriors(df=1.0), complete_adjacency(3))

    assert_allclose(sigma, np.eye(3))


def test_sigma_update_respects_the_graph() -> None:
    rng = np.random.default_rng(7)
    factor = rng.normal(size=(3, 40))
    sigma = m_step_sigma(factor @ factor.T, 40, CovariancePriors(), path_adjacency(3))

    assert abs(np.linalg.inv(sigma)[0, 2]) < 1e-8


def test_state_covariance_update_for_one_series() -> None:
    scatter = np.array([[2.0, 0.3, 0.1], [0.3, 1.0, 0.2], [0.1, 0.2, 0.5]])
    sigma_u, sigma_v, sigma_w = m_step_state_cov(scatter, 10, CovariancePriors(), complete_adjacency(1))

    prior = 0.1**2 * 2
    assert sigma_u[0, 0] == pytest.approx((2.0 + prior) / 8.0)
    assert sigma_v[0, 0] == pytest.approx((1.0 + prior) / 8.0)
    assert sigma_w[0, 0] == pytest.approx((0.5 + prior) / 8.0)


def test_complete_missing_conditions_on_observed_rows() -> None:
    observed = np.array([[1.0, np.nan], [np.nan, np.nan]])
    effect = np.array([[0.5, 0.2], [0.1, 0.3]])
    sigma = np.array([[1.0, 0.5], [0.5, 2.0]])
    z = np.array([[1.0, 0.0], [0.0, 1.0]])

    completed, loadings, extra = complete_missing(observed, effect, sigma, z)

    assert completed[1, 0] == pytest.approx(0.1 + 0.5 * 0.5)
    assert_allclose(loadings[0, 1], [0.5, 0.0])
    assert extra[0, 1, 1] == pytest.approx(2.0 - 0.25)
    assert_allclose(completed[:, 1], effect[:, 1])
    assert_array_equal(loadings[1], 0.0)
    assert_allclose(extra[1], sigma)


def test_threshold_examples() -> None:
    threshold, degenerate = selection_threshold(0.1, 10.0, 0.5)
    assert threshold == pytest.approx(0.6821, abs=1e-4)
    assert not degenerate

    assert selection_threshold(0.1, 10.0, 1.0 - 1e-12)[0] == 0.0
    assert selection_threshold(0.1, 10.0, 1.0) == (0.0, False)
    assert selection_threshold(1.0, 1.0, 0.5) == (0.0, True)
    assert selection_threshold(0.1, 10.0, 0.0)[0] == np.inf


def test_threshold_is_where_inclusion_crosses_one_half() -> None:
    for v0, theta in ((0.1, 0.5), (0.01, 0.3), (0.002, 0.1)):
        threshold, _ = selection_threshold(v0, 10.0, theta)
        weights, _ = e_step_gamma(np.array([threshold]), theta, v0, 10.0)
        assert weights[0] == pytest.approx(0.5, abs=1e-9)


def test_run_recovers_coefficients() -> None:
    panel = synthetic_panel(10)
    spec = StructuralSpec(n_series=2, seasonal_period=7)
    state = run_emvs(panel, spec, SpikeSlabConfig(), 0.01)

    assert_allclose(state.beta, np.concatenate(TRUE_BETA), atol=0.25)
    assert state.iterations >= 1
    assert len(state.q_trace) == state.iterations
    assert np.all((state.inclusion_weights >= 0) & (state.inclusion_weights <= 1))
    assert np.all(state.precision_weights >= 1 / 10.0 - 1e-12)
    assert np.all(state.precision_weights <= 1 / 0.01 + 1e-9)


def test_run_with_missing_values() -> None:
    panel = synthetic_panel(11, missing=True)
    spec = StructuralSpec(n_series=2, seasonal_period=7, adjacency=complete_adjacency(2))
    state = run_emvs(panel, spec, SpikeSlabConfig(max_iters=20), 0.01)

    assert_allclose(state.beta, np.concatenate(TRUE_BETA), atol=0.3)


@pytest.mark.parametrize("variant", [EmvsVariant.NONSTATIONARY, EmvsVariant.MISSPECIFIED])
def test_other_variants_agree(variant: EmvsVariant) -> None:
    panel = synthetic_panel(12)
    spec = StructuralSpec(n_series=2, seasonal_period=7)
    state = run_emvs(panel, spec, SpikeSlabConfig(variant=variant, max_iters=20), 0.01)

    assert_allclose(state.beta, np.concatenate(TRUE_BETA), atol=0.3)


def test_tempering_keeps_the_support() -> None:
    panel = synthetic_panel(13)
    spec = StructuralSpec(n_series=2, seasonal_period=7)
    plain = run_emvs(panel, spec, SpikeSlabConfig(temperature=1.0, max_iters=20), 0.01)
    tempered = run_emvs(panel, spec, SpikeSlabConfig(temperature=0.999, max_iters=20), 0.01)

    assert_array_equal(np.abs(plain.beta) > 0.5, np.abs(tempered.beta) > 0.5)


def test_unobserved_panel_keeps_zero_coefficients() -> None:
    panel = synthetic_panel(14, n_times=20)
    panel = panel.with_observed(np.full_like(panel.observed, np.nan))
    state = run_emvs(panel, StructuralSpec(n_series=2, seasonal_period=7), SpikeSlabConfig(max_iters=3), 0.01)

    assert_allclose(state.beta, 0.0, atol=1e-12)


def test_grid_scan_warm_and_cold_agree() -> None:
    panel = synthetic_panel(15)
    spec = StructuralSpec(n_series=2, seasonal_period=7)
    config = SpikeSlabConfig(v0_grid=[0.005, 0.01], convergence_tol=1e-9)

    warm = v0_grid_scan(panel, spec, config)
    cold = v0_grid_scan(panel, spec, dataclasses.replace(config, warm_start=False))

    assert [state.v0 for state in warm] == [0.005, 0.01]
    assert [state.v0 for state in cold] == [0.005, 0.01]
    assert_allclose(warm[-1].beta, cold[-1].beta, atol=0.05)


def test_single_point_grid() -> None:
    panel = synthetic_panel(16, n_times=30)
    spec = StructuralSpec(n_series=2, seasonal_period=7)
    config = SpikeSlabConfig(v0_grid=[0.01], max_iters=5)

    states = v0_grid_scan(panel, spec, config)

    assert len(states) == 1
    assert_allclose(states[0].beta, run_emvs(panel, spec, config, 0.01).beta)


def test_select_coefficients_drops_stores() -> None:
    Logger.reset()
    panel = synthetic_panel(17, n_times=10)
    config = SpikeSlabConfig(v0_grid=[0.1])
    state = EmvsState.initial(2, 6, config)
    state.v0 = 0.1
    state.beta = np.array([1.0, 0.01, -0.9, 0.2, 0.0, 0.1])

    selection = select_coefficients(panel, [state], config)

    assert selection.threshold == pytest.approx(0.6821, abs=1e-4)
    assert_array_equal(selection.beta, [1.0, 0.0, -0.9, 0.0, 0.0, 0.0])
    assert_array_equal(selection.support[0], [True, False, True])
    assert selection.dropped_stores == ["store1"]
    assert selection.n_selected == 2
    assert Logger.messages("store1")


def test_unrelated_controls_are_not_selected() -> None:
    panel = synthetic_panel(19)
    rng = np.random.default_rng(19)
    trend = 1.0 + np.cumsum(rng.normal(0.0, 0.05, (2, panel.n_times)), axis=1)
    panel = panel.with_observed(trend + rng.normal(0.0, 0.3, (2, panel.n_times)))
    config = SpikeSlabConfig(v0_grid=[0.005, 0.02], max_iters=20)

    states = v0_grid_scan(panel, StructuralSpec(n_series=2, seasonal_period=7), config)
    selection = select_coefficients(panel, states, config)

    assert selection.n_selected == 0
    assert selection.dropped_stores == ["store0", "store1"]


def test_path_table(tmp_path) -> None:
    panel = synthetic_panel(18, n_times=10)
    config = SpikeSlabConfig(v0_grid=[0.1])
    state = EmvsState.initial(2, 6, config)
    state.v0 = 0.1
    rows = path_rows(panel, [state, dataclasses.replace(state, v0=0.2)], config)
    file_name = tmp_path / "path.csv"

    write_path_table(rows, str(file_name))
    table = pd.read_csv(file_name)

    assert len(table) == 12
    assert list(table.columns[:5]) == ["v0", "index", "store_id", "control_id", "beta"]
    assert table["control_id"].iloc[3] == "control1_0"
