"""
Simulated store panels and the replication experiments run on them.
"""

import asyncio
import dataclasses
from enum import StrEnum
from pathlib import Path
from typing import Awaitable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import cholesky
from scipy.signal import lfilter

from causal_ssm.causal import CausalConfig, CausalPipeline, ModelArm
from causal_ssm.emvs import EmvsVariant, SpikeSlabConfig, path_rows, v0_grid_scan_async
from causal_ssm.errors import CausalSsmError
from causal_ssm.logger import Logger
from causal_ssm.mcmc import McmcConfig
from causal_ssm.panel.models import TimeSeriesPanel
from causal_ssm.simulation.models import SimConfig, SimulatedPanel
from causal_ssm.structural import CovariancePriors, StructuralSpec
from causal_ssm.utils import write_table

LOG_ENTRY = "simulation"

REGION = "simulated"

DIFFERENCE_TABLE_COLUMNS = ["seed", "arm", "dataset", "store_id", "simulated_impact", "median", "lower", "upper"]
KS_TABLE_COLUMNS = [
    "seed",
    "arm",
    "dataset",
    "store_id",
    "horizon",
    "timestamp",
    "ks_distance",
    "threshold",
    "significant",
]


class Experiment(StrEnum):
    """
    Replication experiments.

    Attributes:
        DIFFERENCES (str): Average impact over the causal period, with credible intervals.
        KS (str): One-sided KS distances and thresholds at every horizon.
        PATHS (str): Regularisation paths of the selection variants.
    """

    DIFFERENCES = "differences"
    KS = "ks"
    PATHS = "paths"


# Selection variants compared on the regularisation path, with their annealing exponent.
SELECTION_ARMS: Dict[str, Tuple[EmvsVariant, float]] = {
    "emvs": (EmvsVariant.STATIONARY, 1.0),
    "daemvs": (EmvsVariant.STATIONARY, 0.1),
    "nonstationary": (EmvsVariant.NONSTATIONARY, 0.1),
    "misspecified": (EmvsVariant.MISSPECIFIED, 0.1),
}


@dataclasses.dataclass
class ExperimentSettings:
    """
    Model configuration shared by the replication experiments.

    Attributes:
        emvs (SpikeSlabConfig): Selection stage.
        mcmc (McmcConfig): Sampler of every fit.
        causal (CausalConfig): Counterfactual count, percentile and parallelism. Its arm is set per experiment.
        priors (CovariancePriors): Covariance priors.
    """

    emvs: SpikeSlabConfig = dataclasses.field(default_factory=SpikeSlabConfig)
    mcmc: McmcConfig = dataclasses.field(default_factory=McmcConfig)
    causal: CausalConfig = dataclasses.field(default_factory=CausalConfig)
    priors: CovariancePriors = dataclasses.field(default_factory=CovariancePriors)


@dataclasses.dataclass
class ReplicationResult:
    """
    Tables of a replication run, every row tagged with its seed.

    Attributes:
        truth (pd.DataFrame): Generated components of every panel.
        differences (pd.DataFrame): Difference estimand over the whole causal period, per arm.
        ks (pd.DataFrame): KS distances and thresholds, per arm and horizon.
        paths (pd.DataFrame): Regularisation paths, per selection variant.
    """

    truth: pd.DataFrame
    differences: pd.DataFrame
    ks: pd.DataFrame
    paths: pd.DataFrame

    def write(self, out_dir: Path) -> List[Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for field in dataclasses.fields(self):
            name, frame = field.name, getattr(self, field.name)
            if frame.empty:
                continue
            file_name = out_dir / f"{name}.csv"
            write_table(frame, file_name)
            written.append(file_name)
        return written


def ar1_paths(
    coef: float, sd: float, start: Optional[float], size: int, n_times: int, rng: np.random.Generator
) -> np.ndarray:
    """
    Independent AR(1) paths, shape (size, n_times).

    Args:
        coef (float): Autoregressive coefficient.
        sd (float): Innovation standard deviation.
        start (Optional[float]): First value of every path, drawn from the stationary law when None.
        size (int): Number of paths.
        n_times (int): Path length.
        rng (np.random.Generator): Random generator.
    """

    shocks = rng.normal(0.0, sd, (size, n_times))
    if start is None:
        shocks[:, 0] /= np.sqrt(1.0 - coef**2)
    else:
        shocks[:, 0] = start
    return np.asarray(lfilter([1.0], [1.0, -coef], shocks, axis=1))


def seasonal_pattern(config: SimConfig) -> np.ndarray:
    angle = 2.0 * np.pi * np.arange(config.n_times) / config.seasonal_period
    return config.seasonal_amplitude * (np.cos(angle) + np.sin(angle))


def generate_panel(config: SimConfig, seed: Optional[int] = None) -> SimulatedPanel:
    """
    Generate test stores on a path graph sharing one set of AR(1) controls.

    Observations are the sum of the trend, the seasonal pattern, the regression on the
    controls, correlated noise and the injected impact.

    Args:
        config (SimConfig): Generator settings.
        seed (Optional[int]): Seed of the generator.

    Returns:
        SimulatedPanel: The panel and every component it was built from.
    """

    rng = np.random.default_rng(seed)
    n, n_times = config.n_series, config.n_times

    trend = ar1_paths(config.trend_coef, config.trend_sd, config.trend_start, n, n_times, rng)
    controls = ar1_paths(config.control_coef, config.control_sd, None, config.n_controls, n_times, rng)
    seasonal = np.tile(seasonal_pattern(config), (n, 1))
    regression = np.tile(np.asarray(config.beta) @ controls, (n, 1))
    noise_factor = cholesky(np.linalg.inv(config.precision), lower=True)
    noise = noise_factor @ rng.standard_normal((n, n_times))
    impact = config.impacts()
    observed = trend + seasonal + regression + noise + impact

    panel = TimeSeriesPanel(
        store_ids=[f"store{i}" for i in range(1, n + 1)],
        regions=[REGION] * n,
        timestamps=config.timestamps,
        observed=observed,
        controls=[controls.copy() for _ in range(n)],
        control_ids=[[f"control{j}" for j in range(1, config.n_controls + 1)] for _ in range(n)],
        causal_start=config.causal_start,
        adjacency=config.adjacency,
        coordinates=np.column_stack([np.arange(n, dtype=float), np.zeros(n)]),
    )
    Logger.info(LOG_ENTRY, f"Generated {n} stores over {n_times} times with seed {seed}")
    return SimulatedPanel(panel, trend, seasonal, regression, noise, impact, config.seasonal_period, seed)


def _pipeline(
    simulated: SimulatedPanel, arm: ModelArm, settings: ExperimentSettings, seed: Optional[int], prefix: str
) -> CausalPipeline:
    panel = simulated.panel
    spec = StructuralSpec(n_series=panel.n_series, seasonal_period=simulated.seasonal_period)
    return CausalPipeline(
        panel,
        spec,
        settings.priors,
        settings.emvs,
        settings.mcmc,
        dataclasses.replace(settings.causal, arm=arm),
        seed,
        log_prefix=prefix,
    )


def _dataset_columns(frame: pd.DataFrame, simulated: SimulatedPanel, arm: str, seed: Optional[int]) -> pd.DataFrame:
    datasets = {store: i + 1 for i, store in enumerate(simulated.panel.store_ids)}
    frame.insert(0, "dataset", frame["store_id"].map(datasets).astype(int))
    frame.insert(0, "arm", arm)
    frame.insert(0, "seed", seed)
    return frame


async def differences_async(
    simulated: SimulatedPanel,
    arm: ModelArm,
    settings: Optional[ExperimentSettings] = None,
    seed: Optional[int] = None,
    prefix: str = "",
) -> pd.DataFrame:
    """
    Average impact of every dataset over the whole causal period under one model arm.

    Returns:
        pd.DataFrame: One row per dataset with the simulated impact, the posterior median and the interval
        bounds. Datasets dropped by the selection have missing estimates.
    """

    settings = settings or ExperimentSettings()
    pipeline = _pipeline(simulated, arm, settings, seed, prefix)
    frame = await pipeline.run_differences()

    panel = simulated.panel
    final = frame[frame["horizon"] == panel.horizon].set_index("store_id")
    truth = simulated.impact[:, panel.causal_start :].mean(axis=1)
    table = pd.DataFrame(
        {
            "store_id": panel.store_ids,
            "simulated_impact": truth,
            "median": final["diff_median"].reindex(panel.store_ids).to_numpy(dtype=float),
            "lower": final["diff_lower"].reindex(panel.store_ids).to_numpy(dtype=float),
            "upper": final["diff_upper"].reindex(panel.store_ids).to_numpy(dtype=float),
        }
    )
    return _dataset_columns(table, simulated, str(arm), seed)[DIFFERENCE_TABLE_COLUMNS]


def replicate_table2(
    simulated: SimulatedPanel,
    arm: ModelArm,
    settings: Optional[ExperimentSettings] = None,
    seed: Optional[int] = None,
) -> pd.DataFrame:
    return asyncio.run(differences_async(simulated, arm, settings, seed))


async def ks_async(
    simulated: SimulatedPanel,
    arm: ModelArm,
    settings: Optional[ExperimentSettings] = None,
    seed: Optional[int] = None,
    prefix: str = "",
) -> pd.DataFrame:
    """
    KS distances and thresholds of every dataset and horizon under one model arm.
    """

    settings = settings or ExperimentSettings()
    report = await _pipeline(simulated, arm, settings, seed, prefix).run()
    frame = report.to_frame()
    if frame.empty:
        return pd.DataFrame(columns=KS_TABLE_COLUMNS)
    return _dataset_columns(frame, simulated, str(arm), seed)[KS_TABLE_COLUMNS]


def replicate_ks_table(
    simulated: SimulatedPanel,
    arm: ModelArm = ModelArm.MULTIVARIATE,
    settings: Optional[ExperimentSettings] = None,
    seed: Optional[int] = None,
) -> pd.DataFrame:
    return asyncio.run(ks_async(simulated, arm, settings, seed))


async def selection_paths_async(
    simulated: SimulatedPanel,
    settings: Optional[ExperimentSettings] = None,
    seed: Optional[int] = None,
    prefix: str = "",
) -> pd.DataFrame:
    """
    Regularisation paths of every selection variant on the pre-period of one panel.

    Returns:
        pd.DataFrame: The path rows of every variant, tagged with the variant name.
    """

    settings = settings or ExperimentSettings()
    pre_panel = simulated.panel.pre_period()
    spec = StructuralSpec(
        n_series=pre_panel.n_series,
        seasonal_period=simulated.seasonal_period,
        adjacency=pre_panel.adjacency,
        control_counts=pre_panel.control_counts,
    )

    async def scan(name: str, variant: EmvsVariant, temperature: float) -> pd.DataFrame:
        config = dataclasses.replace(settings.emvs, variant=variant, temperature=temperature)
        states = await v0_grid_scan_async(
            pre_panel, spec, config, settings.priors, settings.causal.max_parallel, f"{prefix}emvs:{name}"
        )
        frame = pd.DataFrame([dataclasses.asdict(row) for row in path_rows(pre_panel, states, config)])
        return _dataset_columns(frame, simulated, name, seed)

    frames = await asyncio.gather(*(scan(name, *arm) for name, arm in SELECTION_ARMS.items()))
    return pd.concat(frames, ignore_index=True)


def replicate_selection_paths(
    simulated: SimulatedPanel, settings: Optional[ExperimentSettings] = None, seed: Optional[int] = None
) -> pd.DataFrame:
    return asyncio.run(selection_paths_async(simulated, settings, seed))


def _concat(frames: Sequence[pd.DataFrame], columns: Optional[List[str]] = None) -> pd.DataFrame:
    non_empty = [frame for frame in frames if not frame.empty]
    if not non_empty:
        return pd.DataFrame(columns=columns)
    return pd.concat(non_empty, ignore_index=True)


async def replicate_async(
    config: SimConfig,
    seeds: Sequence[int],
    arms: Sequence[ModelArm],
    experiments: Sequence[Experiment],
    settings: Optional[ExperimentSettings] = None,
) -> ReplicationResult:
    """
    Run the requested experiments on one generated panel per seed.

    Every seed, arm and experiment runs concurrently and logs under its own prefix.

    Args:
        config (SimConfig): Generator settings.
        seeds (Sequence[int]): One replicate per seed.
        arms (Sequence[ModelArm]): Model arms of the difference and KS experiments.
        experiments (Sequence[Experiment]): Experiments to run.
        settings (Optional[ExperimentSettings]): Model configuration.

    Returns:
        ReplicationResult: Concatenated tables, rows ordered by seed, arm and dataset.
    """

    settings = settings or ExperimentSettings()
    truth: List[pd.DataFrame] = []
    differences: List[Awaitable[pd.DataFrame]] = []
    ks: List[Awaitable[pd.DataFrame]] = []
    paths: List[Awaitable[pd.DataFrame]] = []
    for seed in seeds:
        simulated = generate_panel(config, seed)
        components = simulated.components()
        components.insert(0, "seed", seed)
        truth.append(components)
        for arm in arms:
            prefix = f"seed{seed}/{arm}/"
            if Experiment.DIFFERENCES in experiments:
                differences.append(differences_async(simulated, arm, settings, seed, prefix))
            if Experiment.KS in experiments:
                ks.append(ks_async(simulated, arm, settings, seed, f"{prefix}ks/"))
        if Experiment.PATHS in experiments:
            paths.append(selection_paths_async(simulated, settings, seed, f"seed{seed}/"))

    try:
        frames = await asyncio.gather(*differences, *ks, *paths)
    except CausalSsmError as error:
        Logger.error(LOG_ENTRY, f"Replication failed: {error}")
        raise

    result = ReplicationResult(
        truth=_concat(truth),
        differences=_concat(frames[: len(differences)], DIFFERENCE_TABLE_COLUMNS),
        ks=_concat(frames[len(differences) : len(differences) + len(ks)], KS_TABLE_COLUMNS),
        paths=_concat(frames[len(differences) + len(ks) :]),
    )
    Logger.info(LOG_ENTRY, f"{len(seeds)} replicates of {', '.join(str(e) for e in experiments)} finished")
    return result


def replicate(
    config: SimConfig,
    seeds: Sequence[int],
    arms: Sequence[ModelArm],
    experiments: Sequence[Experiment],
    settings: Optional[ExperimentSettings] = None,
) -> ReplicationResult:
    return asyncio.run(replicate_async(config, seeds, arms, experiments, settings))
