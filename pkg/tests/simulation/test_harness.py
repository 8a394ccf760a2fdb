import dataclasses

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from causal_ssm.causal import ModelArm
from causal_ssm.logger import Logger
from causal_ssm.simulation import (
    Experiment,
    ExperimentSettings,
    ReplicationResult,
    SimConfig,
    generate_panel,
    replicate,
    replicate_ks_table,
    replicate_selection_paths,
    replicate_table2,
)
from causal_ssm.simulation.harness import DIFFERENCE_TABLE_COLUMNS, KS_TABLE_COLUMNS, SELECTION_ARMS


@pytest.mark.parametrize("arm", list(ModelArm))
def test_difference_table(arm: ModelArm, tiny_config, tiny_panel, tiny_settings) -> None:
    table = replicate_table2(tiny_panel, arm, tiny_settings, seed=1)

    assert list(table.columns) == DIFFERENCE_TABLE_COLUMNS
    assert list(table["dataset"]) == [1, 2]
    assert list(table["arm"]) == [str(arm)] * 2
    assert_allclose(table["simulated_impact"], tiny_config.mean_impacts())
    assert np.all(np.isfinite(table[["median", "lower", "upper"]].to_numpy()))
    assert np.all(table["lower"] <= table["median"])
    assert np.all(table["median"] <= table["upper"])


def test_ks_table(tiny_panel, tiny_settings) -> None:
    table = replicate_ks_table(tiny_panel, ModelArm.MULTIVARIATE, tiny_settings, seed=2)

    horizon = tiny_panel.panel.horizon
    assert list(table.columns) == KS_TABLE_COLUMNS
    assert len(table) == 2 * horizon
    assert list(table["horizon"].iloc[:horizon]) == list(range(1, horizon + 1))
    assert table["timestamp"].iloc[0] == pd.Timestamp("2016-01-25")
    assert_array_equal(table["significant"], table["ks_distance"] > table["threshold"])


def test_selection_paths(tiny_panel, tiny_settings) -> None:
    settings = dataclasses.replace(tiny_settings, emvs=dataclasses.replace(tiny_settings.emvs, v0_grid=[0.001, 0.01]))

    table = replicate_selection_paths(tiny_panel, settings, seed=3)

    assert list(table["arm"].unique()) == list(SELECTION_ARMS)
    assert len(table) == len(SELECTION_ARMS) * 2 * 4
    assert set(table["dataset"]) == {1, 2}
    assert set(table["v0"]) == {0.001, 0.01}
    for arm in SELECTION_ARMS:
        assert Logger.messages(f"emvs:{arm}")


def test_replication_driver(tiny_config, tiny_settings, tmp_path) -> None:
    arms = [ModelArm.MULTIVARIATE, ModelArm.UNIVARIATE]

    result = replicate(tiny_config, [1, 2], arms, [Experiment.DIFFERENCES], tiny_settings)
    again = replicate(tiny_config, [1, 2], arms, [Experiment.DIFFERENCES], tiny_settings)

    assert list(result.differences["seed"]) == [1, 1, 1, 1, 2, 2, 2, 2]
    assert list(result.differences["arm"].iloc[:4]) == ["multivariate", "multivariate", "univariate", "univariate"]
    assert result.ks.empty
    assert result.paths.empty
    assert len(result.truth) == 2 * 2 * tiny_config.n_times
    pd.testing.assert_frame_equal(result.differences, again.differences)
    assert Logger.messages("seed1/multivariate/mcmc:simulated:pre-period")
    assert Logger.messages("seed2/univariate/mcmc:simulated:pre-period")

    written = result.write(tmp_path)

    assert [path.name for path in written] == ["truth.csv", "differences.csv"]
    truth = pd.read_csv(tmp_path / "truth.csv", float_precision="round_trip")
    simulated = generate_panel(tiny_config, seed=1)
    assert_array_equal(truth["observed"].iloc[: tiny_config.n_times], simulated.panel.observed[0])


def replicate_default(seeds, arms, experiments) -> ReplicationResult:
    return replicate(SimConfig(), seeds, arms, experiments, ExperimentSettings())


@pytest.mark.slow
def test_selection_recovers_the_true_coefficients() -> None:
    result = replicate_default(range(5), [], [Experiment.PATHS])
    paths = result.paths[result.paths["arm"] == "daemvs"]

    recovered = 0
    for _, replicate_paths in paths.groupby("seed"):
        last = replicate_paths[replicate_paths["v0"] == replicate_paths["v0"].max()]
        first = last.loc[last["control_id"] == "control1", "beta"]
        second = last.loc[last["control_id"] == "control2", "beta"]
        zeros = replicate_paths[~replicate_paths["control_id"].isin(["control1", "control2"])]
        recovered += bool(
            first.between(0.75, 1.25).all()
            and second.between(1.75, 2.25).all()
            and (zeros["beta"].abs() <= zeros["threshold"]).all()
        )
    assert recovered >= 4


@pytest.mark.slow
def test_difference_table_pattern() -> None:
    result = replicate_default([0], list(ModelArm), [Experiment.DIFFERENCES])
    table = result.differences
    contains_zero = (table["lower"] <= 0.0) & (table["upper"] >= 0.0)

    stationary = table["arm"] == "multivariate"
    assert list(contains_zero[stationary]) == [True, True, False, False, False]
    assert np.all(np.abs(table.loc[stationary, "median"] - table.loc[stationary, "simulated_impact"]) <= 0.75)
    assert contains_zero[table["arm"] == "nonstationary"].all()
    width = (table["upper"] - table["lower"]).to_numpy()
    univariate = (table["arm"] == "univariate").to_numpy()
    assert np.all(width[univariate] > width[stationary.to_numpy()])


@pytest.mark.slow
def test_ks_detection_pattern() -> None:
    result = replicate_default(range(5), [ModelArm.MULTIVARIATE], [Experiment.KS])

    detected = 0
    for _, table in result.ks.groupby("seed"):
        flags = table.pivot(index="dataset", columns="horizon", values="significant")
        detected += bool(
            not flags.loc[1].any()
            and flags.loc[[3, 4, 5], 10:].all(axis=None)
            and flags.loc[2, 2:8].any()
        )
    assert detected >= 4
