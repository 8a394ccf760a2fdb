import dataclasses
from pathlib import Path
from typing import Any, Dict, Optional, Union

import json5
from dataclass_wizard import fromdict
from dataclass_wizard.errors import JSONWizardError

from causal_ssm.causal import CausalConfig
from causal_ssm.emvs import SpikeSlabConfig
from causal_ssm.errors import ValidationError
from causal_ssm.mcmc import McmcConfig
from causal_ssm.panel.ingest import MAX_REGION_SIZE
from causal_ssm.panel.models import TimeSeriesPanel
from causal_ssm.simulation import ExperimentSettings, SimConfig
from causal_ssm.structural import CovariancePriors, SlopeMode, StructuralSpec


@dataclasses.dataclass
class DataConfig:
    """
    Input files of a run.

    Attributes:
        panel_file (Optional[str]): Long panel file, the simulated panel is used when omitted.
        coordinates_file (Optional[str]): Store coordinates used to derive the store graph.
        causal_start (Optional[str]): First timestamp of the causal period.
        distance_threshold (Optional[float]): Largest distance between connected stores.
        max_region_size (int): Largest region allowed when the graph is derived from coordinates.
    """

    panel_file: Optional[str] = None
    coordinates_file: Optional[str] = None
    causal_start: Optional[str] = None
    distance_threshold: Optional[float] = None
    max_region_size: int = MAX_REGION_SIZE


@dataclasses.dataclass
class ModelConfig:
    """
    Structural model of the test stores.

    Attributes:
        seasonal_period (int): Seasonal period S.
        slope_mode (SlopeMode): Slope dynamics of the univariate arm.
    """

    seasonal_period: int = 7
    slope_mode: SlopeMode = SlopeMode.STATIONARY


@dataclasses.dataclass
class RunConfig:
    """
    Complete configuration of a command, read from a JSON5 file and overridden by command line flags.

    Attributes:
        data (DataConfig): Input files.
        model (ModelConfig): Structural model.
        priors (CovariancePriors): G-Wishart priors of the covariance matrices.
        emvs (SpikeSlabConfig): Selection stage.
        mcmc (McmcConfig): Sampler.
        causal (CausalConfig): Causal estimands.
        simulation (SimConfig): Generator of the simulated panel.
        output_dir (str): Directory receiving every output file.
        seed (Optional[int]): Root seed of the run.
    """

    data: DataConfig = dataclasses.field(default_factory=DataConfig)
    model: ModelConfig = dataclasses.field(default_factory=ModelConfig)
    priors: CovariancePriors = dataclasses.field(default_factory=CovariancePriors)
    emvs: SpikeSlabConfig = dataclasses.field(default_factory=SpikeSlabConfig)
    mcmc: McmcConfig = dataclasses.field(default_factory=McmcConfig)
    causal: CausalConfig = dataclasses.field(default_factory=CausalConfig)
    simulation: SimConfig = dataclasses.field(default_factory=SimConfig)
    output_dir: str = "output"
    seed: Optional[int] = None

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "RunConfig":
        try:
            return fromdict(RunConfig, data)
        except ValidationError:
            raise
        except (JSONWizardError, TypeError, ValueError) as error:
            raise ValidationError(f"Invalid configuration: {error}") from error

    @staticmethod
    def load(file_name: Union[str, Path]) -> "RunConfig":
        """
        Read a configuration file, missing sections keep their defaults.

        Args:
            file_name (Union[str, Path]): JSON5 file.

        Returns:
            RunConfig: The configuration.

        Raises:
            ValidationError: If the file is missing, malformed or holds invalid values.
        """

        try:
            with open(file_name, "r", encoding="utf-8") as config_file:
                data = json5.load(config_file)
        except OSError as error:
            raise ValidationError(f"Unable to read configuration {file_name}: {error}") from error
        except Exception as error:  # pylint: disable=broad-except
            raise ValidationError(f"Malformed configuration {file_name}: {error}") from error
        if not isinstance(data, dict):
            raise ValidationError(f"Configuration {file_name} must hold an object")
        return RunConfig.from_dict(data)

    def validate(self) -> None:
        """
        Check the values a dataclass cannot check on its own.

        Raises:
            ValidationError: If a referenced file is missing or a value is out of range.
        """

        for name in ("panel_file", "coordinates_file"):
            file_name = getattr(self.data, name)
            if file_name is not None and not Path(file_name).is_file():
                raise ValidationError(f"{name} {file_name} does not exist")
        if self.data.panel_file is not None and self.data.causal_start is None:
            raise ValidationError("causal_start is required with a panel file")
        if self.data.coordinates_file is not None:
            if self.data.distance_threshold is None or self.data.distance_threshold <= 0:
                raise ValidationError("A positive distance_threshold is required with a coordinates file")
        if self.data.max_region_size < 1:
            raise ValidationError("max_region_size must be positive")
        if self.model.seasonal_period < 2:
            raise ValidationError("Seasonal period must be at least 2")

    def structural_spec(self, panel: TimeSeriesPanel) -> StructuralSpec:
        return StructuralSpec(
            n_series=panel.n_series,
            seasonal_period=self.model.seasonal_period,
            slope_mode=SlopeMode(self.model.slope_mode),
            adjacency=panel.adjacency,
            control_counts=panel.control_counts,
        )

    def settings(self) -> ExperimentSettings:
        return ExperimentSettings(emvs=self.emvs, mcmc=self.mcmc, causal=self.causal, priors=self.priors)
