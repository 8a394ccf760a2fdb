"""
End-to-end causal analysis of a store panel.

Per region, the controls are selected on the pre-period, the model is fitted on the
pre-period and k counterfactual datasets of the causal period are drawn from its
posterior predictive. The model is then re-fitted on every counterfactual dataset and on
the observed data, and the trend partial sums of these fits give the KS distances and
their thresholds.
"""

import asyncio
import dataclasses
from typing import Awaitable, Callable, List, Optional, TypeVar

import numpy as np
import pandas as pd

from causal_ssm.causal.estimands import (
    difference_estimand,
    ks_thresholds,
    ks_trajectories,
    predict_counterfactuals,
    predictive_draws,
)
from causal_ssm.causal.models import CausalConfig, CausalReport, CausalRow, ModelArm
from causal_ssm.emvs import SpikeSlabConfig, select_coefficients, v0_grid_scan_async
from causal_ssm.errors import CausalSsmError, ValidationError
from causal_ssm.logger import Logger
from causal_ssm.mcmc import McmcConfig, PosteriorDraws, run_chain, run_univariate_arm
from causal_ssm.panel.models import TimeSeriesPanel, region_rows
from causal_ssm.structural import CovariancePriors, SlopeMode, StructuralSpec
from causal_ssm.utils import spawn_generators

LOG_ENTRY = "causal"

DIFFERENCE_COLUMNS = ["store_id", "region", "horizon", "diff_median", "diff_lower", "diff_upper"]

T = TypeVar("T")


@dataclasses.dataclass
class RegionResult:
    """
    Intermediate results of one region, kept for the experiment tables.

    Attributes:
        region (str): Region label.
        report (CausalReport): Rows of the region.
        ks_distances (np.ndarray): Distances, shape (n, P).
        thresholds (np.ndarray): Thresholds, shape (n, P).
        store_ids (List[str]): Stores analysed, in row order.
        pre_draws (Optional[PosteriorDraws]): Draws of the pre-period fit.
    """

    region: str
    report: CausalReport
    ks_distances: np.ndarray
    thresholds: np.ndarray
    store_ids: List[str]
    pre_draws: Optional[PosteriorDraws] = None


@dataclasses.dataclass
class SelectedRegion:
    """
    Stores of a region kept after the control selection.

    Attributes:
        region (str): Region label.
        panel (Optional[TimeSeriesPanel]): Kept stores with their selected controls, None when none is left.
        spec (Optional[StructuralSpec]): Model of the kept stores.
        priors (CovariancePriors): Covariance priors restricted to the kept stores.
        beta (np.ndarray): Selected coefficients, stacked over the kept stores.
        dropped_stores (List[str]): Stores without any selected control.
    """

    region: str
    panel: Optional[TimeSeriesPanel]
    spec: Optional[StructuralSpec]
    priors: CovariancePriors
    beta: np.ndarray
    dropped_stores: List[str]


def subset_priors(priors: CovariancePriors, rows: List[int]) -> CovariancePriors:
    if priors.scale is None:
        return priors
    scale = np.asarray(priors.scale, dtype=float)[np.ix_(rows, rows)]
    return dataclasses.replace(priors, scale=scale.tolist())


class CausalPipeline:
    """
    Runs the selection, the fits and both estimands on every region of a panel.

    Stores in different regions are treated as independent and analysed separately. Every
    log entry written by the pipeline starts with log_prefix.
    """

    def __init__(
        self,
        panel: TimeSeriesPanel,
        spec: StructuralSpec,
        priors: Optional[CovariancePriors] = None,
        emvs_config: Optional[SpikeSlabConfig] = None,
        mcmc_config: Optional[McmcConfig] = None,
        causal_config: Optional[CausalConfig] = None,
        seed: Optional[int] = None,
        log_prefix: str = "",
    ) -> None:
        self.panel = panel
        self.spec = spec
        self.priors = priors or CovariancePriors()
        self.emvs_config = emvs_config or SpikeSlabConfig()
        self.mcmc_config = mcmc_config or McmcConfig()
        self.causal_config = causal_config or CausalConfig()
        self.seed = seed
        self.log_prefix = log_prefix
        self.results: List[RegionResult] = []
        self._semaphore: Optional[asyncio.Semaphore] = None

        if panel.horizon < 1:
            raise ValidationError("The panel has no causal period")
        if panel.causal_start < spec.seasonal_period + 2:
            raise ValidationError(
                f"Pre-period of {panel.causal_start} times is too short for seasonal period {spec.seasonal_period}"
            )

    def entry(self, name: str) -> str:
        return f"{self.log_prefix}{name}"

    @property
    def slope_mode(self) -> SlopeMode:
        if self.causal_config.arm == ModelArm.NONSTATIONARY:
            return SlopeMode.RANDOM_WALK
        if self.causal_config.arm == ModelArm.MULTIVARIATE:
            return SlopeMode.STATIONARY
        return self.spec.slope_mode

    def region_spec(self, panel: TimeSeriesPanel) -> StructuralSpec:
        return dataclasses.replace(
            self.spec,
            n_series=panel.n_series,
            slope_mode=self.slope_mode,
            adjacency=panel.adjacency,
            control_counts=panel.control_counts,
        )

    def fit(
        self,
        panel: TimeSeriesPanel,
        spec: StructuralSpec,
        priors: CovariancePriors,
        beta: np.ndarray,
        rng: np.random.Generator,
        trend_start: Optional[int],
        log_entry: str,
    ) -> PosteriorDraws:
        """
        One chain of the configured arm.
        """

        if self.causal_config.arm == ModelArm.UNIVARIATE:
            return run_univariate_arm(panel, spec, beta, self.mcmc_config, rng, trend_start, log_entry)
        return run_chain(
            panel, spec, beta, priors, self.mcmc_config, rng, trend_start=trend_start, log_entry=log_entry
        )

    async def _fit_async(
        self,
        panel: TimeSeriesPanel,
        spec: StructuralSpec,
        priors: CovariancePriors,
        beta: np.ndarray,
        rng: np.random.Generator,
        trend_start: Optional[int],
        log_entry: str,
    ) -> PosteriorDraws:
        assert self._semaphore is not None
        async with self._semaphore:
            draws = await asyncio.to_thread(self.fit, panel, spec, priors, beta, rng, trend_start, log_entry)
        Logger.info(log_entry, f"Fit finished with {draws.n_draws} draws")
        return draws

    def _empty_report(self) -> CausalReport:
        config = self.causal_config
        return CausalReport(arm=config.arm, k=config.k, percentile=config.percentile)

    async def select_region(self, region: str, rows: List[int]) -> SelectedRegion:
        """
        Select the controls of one region on its pre-period and drop the stores left without any.

        Args:
            region (str): Region label.
            rows (List[int]): Panel rows of the region.

        Returns:
            SelectedRegion: The reduced panel and its model, None when every store was dropped.
        """

        panel = self.panel.subset(rows)
        priors = subset_priors(self.priors, rows)
        pre_panel = panel.pre_period()

        Logger.info(self.entry(f"{LOG_ENTRY}:{region}"), f"Selecting controls of {panel.n_series} stores")
        states = await v0_grid_scan_async(
            pre_panel,
            self.region_spec(pre_panel),
            self.emvs_config,
            priors,
            self.causal_config.max_parallel,
            self.entry(f"emvs:{region}"),
        )
        selection = select_coefficients(pre_panel, states, self.emvs_config, self.entry(f"emvs:{region}"))

        kept = [i for i, store in enumerate(panel.store_ids) if store not in selection.dropped_stores]
        if not kept:
            Logger.warning(self.entry(f"{LOG_ENTRY}:{region}"), "Every store was dropped, nothing left to analyse")
            return SelectedRegion(region, None, None, priors, np.zeros(0), list(selection.dropped_stores))

        blocks = panel.split_beta(selection.beta)
        support = [selection.support[i] for i in kept]
        panel = panel.subset(kept).with_controls(support)
        return SelectedRegion(
            region=region,
            panel=panel,
            spec=self.region_spec(panel),
            priors=subset_priors(priors, kept),
            beta=np.concatenate([blocks[i][mask] for i, mask in zip(kept, support)]),
            dropped_stores=list(selection.dropped_stores),
        )

    async def run_region(self, region: str, rows: List[int], rng: np.random.Generator) -> RegionResult:
        """
        Analyse the stores of one region.

        Args:
            region (str): Region label.
            rows (List[int]): Panel rows of the region.
            rng (np.random.Generator): Generator of the region.

        Returns:
            RegionResult: Rows of the region and the per-horizon distances and thresholds.
        """

        config = self.causal_config
        selected = await self.select_region(region, rows)
        report = self._empty_report()
        report.dropped_stores = selected.dropped_stores
        if selected.panel is None or selected.spec is None:
            horizon = self.panel.horizon
            return RegionResult(region, report, np.zeros((0, horizon)), np.zeros((0, horizon)), [])

        panel, spec, priors, beta = selected.panel, selected.spec, selected.priors, selected.beta
        report.selected_controls = dict(zip(panel.store_ids, panel.control_ids))
        causal_start, horizon = panel.causal_start, panel.horizon
        pre_rng, predict_rng, *fit_rngs = spawn_generators(int(rng.integers(2**62)), config.k + 3)
        pre_draws = await self._fit_async(
            panel.pre_period(), spec, priors, beta, pre_rng, None, self.entry(f"mcmc:{region}:pre-period")
        )
        counterfactual = predict_counterfactuals(pre_draws, panel, horizon, config.k, predict_rng)
        predictive = predictive_draws(pre_draws, panel, predict_rng, horizon)

        pre_observed = panel.observed[:, :causal_start]
        refits = [
            self._fit_async(
                panel.with_observed(np.concatenate([pre_observed, dataset], axis=1)),
                spec,
                priors,
                beta,
                fit_rng,
                causal_start,
                self.entry(f"mcmc:{region}:counterfactual{j}"),
            )
            for j, (dataset, fit_rng) in enumerate(zip(counterfactual.datasets, fit_rngs))
        ]
        observed_entry = self.entry(f"mcmc:{region}:observed")
        observed_fit = self._fit_async(panel, spec, priors, beta, fit_rngs[-1], causal_start, observed_entry)
        *counterfactual_fits, observed_draws = await asyncio.gather(*refits, observed_fit)

        counterfactual_sums = [draws.trend_partial_sums() for draws in counterfactual_fits]
        distances = ks_trajectories(observed_draws.trend_partial_sums(), counterfactual_sums)
        thresholds = ks_thresholds(counterfactual_sums, config.percentile)
        summary = difference_estimand(panel.observed[:, causal_start:], predictive, config.level)

        for i, store in enumerate(panel.store_ids):
            for m in range(horizon):
                report.rows.append(
                    CausalRow(
                        store_id=store,
                        region=region,
                        horizon=m + 1,
                        timestamp=panel.timestamps[causal_start + m],
                        ks_distance=float(distances[i, m]),
                        threshold=float(thresholds[i, m]),
                        significant=bool(distances[i, m] > thresholds[i, m]),
                        diff_median=float(summary.median[i, m]),
                        diff_lower=float(summary.lower[i, m]),
                        diff_upper=float(summary.upper[i, m]),
                    )
                )
            flagged = int(np.sum(distances[i] > thresholds[i]))
            Logger.info(self.entry(store), f"Significant at {flagged} of {horizon} horizons")
        return RegionResult(region, report, distances, thresholds, list(panel.store_ids), pre_draws)

    async def difference_region(self, region: str, rows: List[int], rng: np.random.Generator) -> pd.DataFrame:
        """
        Difference estimand of one region, without the counterfactual re-fits.

        Returns:
            pd.DataFrame: One row per store and horizon with the median and interval bounds.
        """

        selected = await self.select_region(region, rows)
        if selected.panel is None or selected.spec is None:
            return pd.DataFrame(columns=DIFFERENCE_COLUMNS)
        panel = selected.panel
        pre_rng, predict_rng = spawn_generators(int(rng.integers(2**62)), 2)
        pre_draws = await self._fit_async(
            panel.pre_period(),
            selected.spec,
            selected.priors,
            selected.beta,
            pre_rng,
            None,
            self.entry(f"mcmc:{region}:pre-period"),
        )
        predictive = predictive_draws(pre_draws, panel, predict_rng)
        summary = difference_estimand(panel.observed[:, panel.causal_start :], predictive, self.causal_config.level)
        n, horizon = summary.median.shape
        return pd.DataFrame(
            {
                "store_id": np.repeat(panel.store_ids, horizon),
                "region": region,
                "horizon": np.tile(np.arange(1, horizon + 1), n),
                "diff_median": summary.median.ravel(),
                "diff_lower": summary.lower.ravel(),
                "diff_upper": summary.upper.ravel(),
            },
            columns=DIFFERENCE_COLUMNS,
        )

    async def _gather_regions(self, job: Callable[[str, List[int], np.random.Generator], Awaitable[T]]) -> List[T]:
        self._semaphore = asyncio.Semaphore(self.causal_config.max_parallel)
        groups = region_rows(self.panel.regions)
        generators = spawn_generators(self.seed, len(groups))
        try:
            jobs = (job(region, rows, rng) for (region, rows), rng in zip(groups.items(), generators))
            return list(await asyncio.gather(*jobs))
        except CausalSsmError as error:
            Logger.error(self.entry(LOG_ENTRY), f"Causal analysis failed: {error}")
            raise

    async def run(self) -> CausalReport:
        self.results = await self._gather_regions(self.run_region)
        report = self._empty_report()
        for result in self.results:
            report = report.merge(result.report)
        summary = f"{len(report.store_ids)} stores analysed, {len(report.dropped_stores)} dropped"
        Logger.info(self.entry(LOG_ENTRY), summary)
        return report

    async def run_differences(self) -> pd.DataFrame:
        """
        Difference estimand of every store, regions concatenated in order of first appearance.
        """

        frames = await self._gather_regions(self.difference_region)
        non_empty = [frame for frame in frames if not frame.empty]
        if not non_empty:
            return pd.DataFrame(columns=DIFFERENCE_COLUMNS)
        return pd.concat(non_empty, ignore_index=True)


def full_causal_pipeline(
    panel: TimeSeriesPanel,
    spec: StructuralSpec,
    priors: Optional[CovariancePriors] = None,
    emvs_config: Optional[SpikeSlabConfig] = None,
    mcmc_config: Optional[McmcConfig] = None,
    causal_config: Optional[CausalConfig] = None,
    seed: Optional[int] = None,
) -> CausalReport:
    pipeline = CausalPipeline(panel, spec, priors, emvs_config, mcmc_config, causal_config, seed)
    return asyncio.run(pipeline.run())
