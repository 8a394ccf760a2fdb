import json

import pandas as pd
import pytest

from causal_ssm import cli
from causal_ssm.errors import NumericalError

SECTIONS = """
    simulation: {n_series: 2, n_controls: 2, beta: [1.0, 2.0], end: "2016-01-30", impact_start: "2016-01-25"},
    emvs: {v0_grid: [0.01], max_iters: 5},
    mcmc: {n_iters: 20, n_burnin: 5},
    causal: {k: 2, max_parallel: 2},
"""

TINY = "{" + SECTIONS + "}"


@pytest.fixture
def config_file(tmp_path):
    file_name = tmp_path / "tiny.json5"
    file_name.write_text(TINY, encoding="utf-8")
    return file_name


def run(config_file, out_dir, *args: str) -> int:
    command, *rest = args
    return cli.main([command, "--config", str(config_file), "--seed", "1", "--out", str(out_dir), *rest])


def manifest(out_dir, command: str) -> dict:
    return json.loads((out_dir / f"{command}_manifest.json").read_text(encoding="utf-8"))


def test_simulate_is_reproducible(config_file, tmp_path) -> None:
    args = ("simulate", "--arm", "multivariate", "--experiment", "differences")
    names = ["panel.csv", "coordinates.csv", "truth.csv", "differences.csv", "simulate_manifest.json"]

    assert run(config_file, tmp_path, *args) == 0
    first = {name: (tmp_path / name).read_bytes() for name in names}
    assert run(config_file, tmp_path, *args) == 0

    for name in names:
        assert (tmp_path / name).read_bytes() == first[name]
    data = manifest(tmp_path, "simulate")
    assert data["command"] == "simulate"
    assert data["seed"] == 1
    assert data["config"]["mcmc"]["n_iters"] == 20


def test_causal_on_written_panel(config_file, tmp_path) -> None:
    assert run(config_file, tmp_path / "data", "simulate") == 0
    data_config = tmp_path / "data.json5"
    data = {
        "panel_file": str(tmp_path / "data" / "panel.csv"),
        "coordinates_file": str(tmp_path / "data" / "coordinates.csv"),
        "causal_start": "2016-01-25",
        "distance_threshold": 1.5,
    }
    data_config.write_text("{" + SECTIONS + f"data: {json.dumps(data)},}}", encoding="utf-8")

    assert run(data_config, tmp_path / "first", "causal") == 0
    assert run(data_config, tmp_path / "second", "causal", "--out-report", str(tmp_path / "elsewhere")) == 0

    first = tmp_path / "first" / "report"
    assert (first / "report.csv").read_bytes() == (tmp_path / "elsewhere" / "report.csv").read_bytes()
    report = pd.read_csv(first / "report.csv")
    assert set(report["store_id"]) | set(json.loads((first / "report.json").read_text())["dropped_stores"]) == {
        "store1",
        "store2",
    }
    assert (first / "weekly_counts.csv").is_file()
    assert manifest(tmp_path / "first", "causal")["entries"]["ingest"]

    assert run(data_config, tmp_path / "rendered", "report", "--report-dir", str(first)) == 0
    for name in ("significant_counts.csv", "weekly_counts.csv", "plot_data.csv"):
        assert (tmp_path / "rendered" / name).read_bytes() == (first / name).read_bytes()


def test_select_writes_path_table(config_file, tmp_path) -> None:
    path_table = tmp_path / "paths.csv"

    status = run(config_file, tmp_path, "select", "--v0-grid", "0.001,0.01", "--out-path-table", str(path_table))

    assert status == 0
    paths = pd.read_csv(path_table)
    assert set(paths["v0"]) == {0.001, 0.01}
    assert len(paths) == 2 * 4
    selection = pd.read_csv(tmp_path / "selection.csv")
    assert list(selection.columns) == ["region", "store_id", "control_id", "beta", "selected"]
    assert list(selection["control_id"]) == ["control1", "control2"] * 2


def test_fit_writes_chain_summary(config_file, tmp_path) -> None:
    assert run(config_file, tmp_path, "fit", "--iters", "30", "--burnin", "10") == 0

    assert (tmp_path / "chain_simulated.csv").is_file()
    assert (tmp_path / "diagnostics_simulated.csv").is_file()
    assert manifest(tmp_path, "fit")["config"]["mcmc"]["n_iters"] == 30


@pytest.mark.parametrize(
    "args",
    [
        ("select", "--temperature", "2"),
        ("fit", "--iters", "10", "--burnin", "10"),
        ("causal", "--k", "1"),
        ("report", "--report-dir", "absent"),
    ],
)
def test_invalid_input_exit_code(config_file, tmp_path, args) -> None:
    assert run(config_file, tmp_path, *args) == cli.EXIT_VALIDATION

    errors = manifest(tmp_path, args[0])["entries"]["cli"]
    assert errors[0]["status"] == "ERROR"


def test_missing_config_exit_code(tmp_path) -> None:
    status = cli.main(["simulate", "--config", str(tmp_path / "absent.json5"), "--out", str(tmp_path)])

    assert status == cli.EXIT_VALIDATION
    assert (tmp_path / "simulate_manifest.json").is_file()


def test_numerical_failure_exit_code(config_file, tmp_path, monkeypatch) -> None:
    def fail(*_) -> None:
        raise NumericalError("singular innovation covariance")

    monkeypatch.setitem(cli.COMMANDS, "fit", fail)

    assert run(config_file, tmp_path, "fit") == cli.EXIT_NUMERICAL
    assert "singular" in manifest(tmp_path, "fit")["entries"]["cli"][0]["message"]
