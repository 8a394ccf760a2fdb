import pytest

from causal_ssm.causal import ModelArm
from causal_ssm.config import RunConfig
from causal_ssm.emvs import EmvsVariant
from causal_ssm.errors import ValidationError
from causal_ssm.structural import SlopeMode

PARTIAL = """
// Only the sections that differ from the defaults.
{
    seed: 7,
    emvs: {v0_grid: [0.001, 0.01], temperature: 1.0, variant: "nonstationary"},
    mcmc: {n_iters: 50, n_burnin: 10},
    causal: {k: 4, arm: "univariate"},
    model: {slope_mode: "random_walk"},
}
"""


def test_partial_file_keeps_defaults(tmp_path) -> None:
    file_name = tmp_path / "run.json5"
    file_name.write_text(PARTIAL, encoding="utf-8")

    config = RunConfig.load(file_name)

    assert config.seed == 7
    assert config.emvs.v0_grid == [0.001, 0.01]
    assert config.emvs.temperature == 1.0
    assert config.emvs.variant == EmvsVariant.NONSTATIONARY
    assert config.emvs.v1 == 10.0
    assert config.mcmc.n_iters == 50
    assert config.mcmc.thinning == 1
    assert config.causal.k == 4
    assert config.causal.arm == ModelArm.UNIVARIATE
    assert config.causal.percentile == 0.95
    assert config.model.slope_mode == SlopeMode.RANDOM_WALK
    assert config.simulation.n_series == 5
    assert config.output_dir == "output"


def test_settings_share_sections() -> None:
    config = RunConfig()

    settings = config.settings()

    assert settings.emvs is config.emvs
    assert settings.mcmc is config.mcmc
    assert settings.causal is config.causal
    assert settings.priors is config.priors


@pytest.mark.parametrize(
    "text",
    [
        "{emvs: {temperature: 2.0}}",
        "{mcmc: {n_iters: 10, n_burnin: 10}}",
        "{causal: {k: 1}}",
        "{simulation: {n_controls: 3}}",
        "{mcmc: 'many'}",
    ],
)
def test_invalid_values(tmp_path, text: str) -> None:
    file_name = tmp_path / "run.json5"
    file_name.write_text(text, encoding="utf-8")

    with pytest.raises(ValidationError):
        RunConfig.load(file_name)


@pytest.mark.parametrize("text", ["{seed: ", "[1, 2]"])
def test_malformed_file(tmp_path, text: str) -> None:
    file_name = tmp_path / "run.json5"
    file_name.write_text(text, encoding="utf-8")

    with pytest.raises(ValidationError):
        RunConfig.load(file_name)


def test_missing_file(tmp_path) -> None:
    with pytest.raises(ValidationError, match="Unable to read"):
        RunConfig.load(tmp_path / "absent.json5")


def test_validate_inputs(tmp_path) -> None:
    panel_file = tmp_path / "panel.csv"
    panel_file.write_text("store_id,role,region,timestamp,value\n", encoding="utf-8")

    config = RunConfig.from_dict({"data": {"panel_file": str(tmp_path / "absent.csv")}})
    with pytest.raises(ValidationError, match="does not exist"):
        config.validate()

    config = RunConfig.from_dict({"data": {"panel_file": str(panel_file)}})
    with pytest.raises(ValidationError, match="causal_start"):
        config.validate()

    config = RunConfig.from_dict(
        {"data": {"panel_file": str(panel_file), "coordinates_file": str(panel_file), "causal_start": "2016-01-02"}}
    )
    with pytest.raises(ValidationError, match="distance_threshold"):
        config.validate()

    config.data.distance_threshold = 1.5
    config.validate()
