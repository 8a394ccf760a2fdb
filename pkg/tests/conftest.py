import pytest

from causal_ssm.causal import CausalConfig
from causal_ssm.emvs import SpikeSlabConfig
from causal_ssm.logger import Logger
from causal_ssm.mcmc import McmcConfig
from causal_ssm.simulation import ExperimentSettings, SimConfig, SimulatedPanel, generate_panel


@pytest.fixture(autouse=True)
def clean_logger():
    Logger.enable()
    Logger.reset()
    yield
    Logger.reset()


@pytest.fixture
def tiny_config() -> SimConfig:
    return SimConfig(n_series=2, n_controls=2, beta=[1.0, 2.0], end="2016-01-30", impact_start="2016-01-25")


@pytest.fixture
def tiny_panel(tiny_config: SimConfig) -> SimulatedPanel:
    return generate_panel(tiny_config, seed=0)


@pytest.fixture
def tiny_settings() -> ExperimentSettings:
    return ExperimentSettings(
        emvs=SpikeSlabConfig(v0_grid=[0.01], max_iters=5),
        mcmc=McmcConfig(n_iters=20, n_burnin=5),
        causal=CausalConfig(k=2, max_parallel=2),
    )
