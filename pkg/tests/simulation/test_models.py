import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from causal_ssm.errors import ValidationError
from causal_ssm.graph import path_adjacency
from causal_ssm.simulation import SimConfig, generate_panel


def test_default_design() -> None:
    config = SimConfig()

    assert config.n_times == 100
    assert config.causal_start == 80
    assert config.timestamps[config.causal_start] == pd.Timestamp("2016-03-21")
    assert_array_equal(config.adjacency, path_adjacency(5))
    expected = 10.0 * np.eye(5) + 5.0 * (np.eye(5, k=1) + np.eye(5, k=-1))
    assert_array_equal(config.precision, expected)


def test_impacts() -> None:
    config = SimConfig()
    impacts = config.impacts()

    assert_array_equal(impacts[:, : config.causal_start], 0.0)
    assert_array_equal(impacts[0], 0.0)
    assert_array_equal(impacts[:, config.causal_start], 0.0)
    assert impacts[4, -1] == pytest.approx(2.0 * np.log(20.0))
    assert impacts[4, -1] == pytest.approx(5.991, abs=1e-3)
    assert_array_equal(np.round(config.mean_impacts(), 2), [0.0, 1.06, 2.12, 3.18, 4.23])


@pytest.mark.parametrize(
    "changes",
    [
        {"beta": [1.0, 2.0]},
        {"impact_start": "2016-05-01"},
        {"impact_start": "2016-01-01"},
        {"control_coef": 1.0},
        {"seasonal_period": 1},
        {"precision_off_diagonal": 20.0},
    ],
)
def test_invalid_configs(changes) -> None:
    with pytest.raises(ValidationError):
        SimConfig(**changes)


def test_components_add_up() -> None:
    simulated = generate_panel(SimConfig(), seed=1)
    panel = simulated.panel

    expected = simulated.trend + simulated.seasonal + simulated.regression + simulated.noise + simulated.impact
    assert_array_equal(panel.observed, expected)
    assert panel.store_ids == ["store1", "store2", "store3", "store4", "store5"]
    assert panel.causal_start == 80
    assert panel.control_counts == [10] * 5
    assert simulated.seasonal[0, 0] == pytest.approx(0.1)
    assert_array_equal(simulated.trend[:, 0], 1.0)
    assert_array_equal(simulated.impact, SimConfig().impacts())


def test_controls_are_shared() -> None:
    config = SimConfig()
    simulated = generate_panel(config, seed=2)
    panel = simulated.panel

    for block in panel.controls[1:]:
        assert_array_equal(block, panel.controls[0])
    assert_allclose(panel.regression_effect(np.tile(config.beta, 5)), simulated.regression, atol=1e-12)


def test_generation_is_deterministic() -> None:
    first = generate_panel(SimConfig(), seed=3)
    second = generate_panel(SimConfig(), seed=3)
    other = generate_panel(SimConfig(), seed=4)

    assert_array_equal(first.panel.observed, second.panel.observed)
    pd.testing.assert_frame_equal(first.components(), second.components())
    assert not np.array_equal(first.panel.observed, other.panel.observed)


def test_noise_follows_the_precision() -> None:
    config = SimConfig(end="2019-12-31")
    simulated = generate_panel(config, seed=5)

    assert_allclose(np.cov(simulated.noise), np.linalg.inv(config.precision), atol=0.05)


def test_components_frame() -> None:
    simulated = generate_panel(SimConfig(), seed=6)
    frame = simulated.components()

    assert len(frame) == 5 * 100
    assert list(frame.columns) == [
        "store_id",
        "timestamp",
        "observed",
        "trend",
        "seasonal",
        "regression",
        "noise",
        "impact",
    ]
    last = frame.iloc[-1]
    assert last["store_id"] == "store5"
    assert last["impact"] == pytest.approx(2.0 * np.log(20.0))
