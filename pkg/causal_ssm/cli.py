"""
Command line entry point.

Every command resolves a RunConfig from an optional JSON5 file and its flags, writes its
outputs under the output directory and dumps a run manifest next to them. Exit status is 0
on success, 2 on invalid input and 3 on numerical failure.
"""

import argparse
import asyncio
import dataclasses
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from causal_ssm.causal import CausalPipeline, ModelArm, subset_priors
from causal_ssm.config import RunConfig
from causal_ssm.emvs import PathRow, path_rows, select_coefficients, v0_grid_scan, write_path_table
from causal_ssm.errors import NumericalError, ValidationError
from causal_ssm.logger import Logger
from causal_ssm.mcmc import write_chain_summary, write_diagnostics
from causal_ssm.panel import TimeSeriesPanel, ingest_panel, region_rows, write_panel
from causal_ssm.report import read_report, render_report, write_report
from causal_ssm.simulation import Experiment, generate_panel, replicate
from causal_ssm.utils import spawn_generators, write_table

LOG_ENTRY = "cli"

EXIT_VALIDATION = 2

EXIT_NUMERICAL = 3

Command = Callable[[argparse.Namespace, RunConfig, Path], None]


def _float_list(text: str) -> List[float]:
    try:
        return [float(value) for value in text.split(",") if value.strip()]
    except ValueError as error:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from error


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON5 run configuration")
    common.add_argument("--seed", type=int, help="root random seed")
    common.add_argument("--out", type=Path, help="output directory")

    parser = argparse.ArgumentParser(
        prog="causal-ssm", description="Causal impact of campaigns on spatially correlated store sales"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", parents=[common], help="generate panels and run replications")
    simulate.add_argument("--arm", action="append", choices=[str(arm) for arm in ModelArm], help="model arm")
    simulate.add_argument("--experiment", action="append", choices=[str(e) for e in Experiment], default=[])
    simulate.add_argument("--replicates", type=int, default=1, help="number of seeds, from the root seed up")

    select = commands.add_parser("select", parents=[common], help="scan the spike variance grid")
    select.add_argument("--v0-grid", type=_float_list, help="comma separated spike variances")
    select.add_argument("--v1", type=float, help="slab variance")
    select.add_argument("--temperature", type=float, help="annealing exponent in (0, 1]")
    select.add_argument("--out-path-table", type=Path, help="regularisation path file")

    fit = commands.add_parser("fit", parents=[common], help="sample the pre-period posterior")
    fit.add_argument("--iters", type=int, help="number of sweeps")
    fit.add_argument("--burnin", type=int, help="discarded sweeps")
    fit.add_argument("--arm", choices=[str(arm) for arm in ModelArm], help="model arm")

    causal = commands.add_parser("causal", parents=[common], help="run the full causal analysis")
    causal.add_argument("--k", type=int, help="number of counterfactual datasets")
    causal.add_argument("--percentile", type=float, help="threshold percentile")
    causal.add_argument("--arm", choices=[str(arm) for arm in ModelArm], help="model arm")
    causal.add_argument("--out-report", type=Path, help="report directory")

    report = commands.add_parser("report", parents=[common], help="summarise a written report")
    report.add_argument("--report-dir", type=Path, required=True, help="directory written by the causal command")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    Load the configuration file, when given, and apply the command line overrides.
    """

    config = RunConfig.load(args.config) if args.config is not None else RunConfig()
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.output_dir = str(args.out)

    overrides = {
        "emvs": {"v0_grid": "v0_grid", "v1": "v1", "temperature": "temperature"},
        "mcmc": {"iters": "n_iters", "burnin": "n_burnin"},
        "causal": {"k": "k", "percentile": "percentile"},
    }
    for section, flags in overrides.items():
        changes = {field: getattr(args, flag) for flag, field in flags.items() if getattr(args, flag, None) is not None}
        if changes:
            setattr(config, section, dataclasses.replace(getattr(config, section), **changes))
    if args.command in ("fit", "causal") and args.arm is not None:
        config.causal = dataclasses.replace(config.causal, arm=ModelArm(args.arm))
    return config


def load_panel(config: RunConfig) -> TimeSeriesPanel:
    """
    The configured panel file, or the simulated panel when there is none.
    """

    data = config.data
    if data.panel_file is None:
        return generate_panel(config.simulation, config.seed).panel
    assert data.causal_start is not None
    return ingest_panel(
        data.panel_file, data.causal_start, data.coordinates_file, data.distance_threshold, data.max_region_size
    )


def run_simulate(args: argparse.Namespace, config: RunConfig, out_dir: Path) -> None:
    seed = 0 if config.seed is None else config.seed
    simulated = generate_panel(config.simulation, seed)
    write_panel(simulated.panel, out_dir / "panel.csv", out_dir / "coordinates.csv")

    arms = [ModelArm(arm) for arm in args.arm] if args.arm else list(ModelArm)
    experiments = [Experiment(experiment) for experiment in args.experiment]
    seeds = list(range(seed, seed + args.replicates))
    result = replicate(config.simulation, seeds, arms, experiments, config.settings())
    result.write(out_dir)


def run_select(args: argparse.Namespace, config: RunConfig, out_dir: Path) -> None:
    panel = load_panel(config)
    rows: List[PathRow] = []
    selection_frames: List[pd.DataFrame] = []
    for region, indices in region_rows(panel.regions).items():
        pre_panel = panel.subset(indices).pre_period()
        priors = subset_priors(config.priors, indices)
        spec = config.structural_spec(pre_panel)
        states = v0_grid_scan(pre_panel, spec, config.emvs, priors, config.causal.max_parallel, f"emvs:{region}")
        rows.extend(path_rows(pre_panel, states, config.emvs))

        selection = select_coefficients(pre_panel, states, config.emvs, f"emvs:{region}")
        names = [(store, name) for store, ids in zip(pre_panel.store_ids, pre_panel.control_ids) for name in ids]
        selection_frames.append(
            pd.DataFrame(
                {
                    "region": region,
                    "store_id": [store for store, _ in names],
                    "control_id": [name for _, name in names],
                    "beta": selection.beta,
                    "selected": np.concatenate(selection.support),
                }
            )
        )
        Logger.info(LOG_ENTRY, f"{region}: {selection.n_selected} controls selected at v0={selection.v0:.6g}")

    write_path_table(rows, str(args.out_path_table or out_dir / "path_table.csv"))
    write_table(pd.concat(selection_frames, ignore_index=True), out_dir / "selection.csv")


def run_fit(_: argparse.Namespace, config: RunConfig, out_dir: Path) -> None:
    panel = load_panel(config)
    pipeline = CausalPipeline(
        panel, config.structural_spec(panel), config.priors, config.emvs, config.mcmc, config.causal, config.seed
    )
    groups = region_rows(panel.regions)
    for (region, indices), rng in zip(groups.items(), spawn_generators(config.seed, len(groups))):
        selected = asyncio.run(pipeline.select_region(region, indices))
        if selected.panel is None or selected.spec is None:
            continue
        draws = pipeline.fit(
            selected.panel.pre_period(),
            selected.spec,
            selected.priors,
            selected.beta,
            rng,
            None,
            f"mcmc:{region}:pre-period",
        )
        write_chain_summary(draws, str(out_dir / f"chain_{region}.csv"))
        write_diagnostics(draws, str(out_dir / f"diagnostics_{region}.csv"))


def run_causal(args: argparse.Namespace, config: RunConfig, out_dir: Path) -> None:
    panel = load_panel(config)
    pipeline = CausalPipeline(
        panel, config.structural_spec(panel), config.priors, config.emvs, config.mcmc, config.causal, config.seed
    )
    report = asyncio.run(pipeline.run())
    report_dir = args.out_report or out_dir / "report"
    write_report(report, report_dir)
    render_report(report, report_dir)


def run_report(args: argparse.Namespace, _: RunConfig, out_dir: Path) -> None:
    render_report(read_report(args.report_dir), out_dir)


COMMANDS: Dict[str, Command] = {
    "simulate": run_simulate,
    "select": run_select,
    "fit": run_fit,
    "causal": run_causal,
    "report": run_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = args.out or Path(RunConfig.output_dir)
    Logger.reset()

    status = 0
    try:
        config = resolve_config(args)
        config.validate()
        out_dir = Path(config.output_dir)
        Logger.start_run(args.command, config.seed, config)
        out_dir.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, config, out_dir)
    except ValidationError as error:
        Logger.error(LOG_ENTRY, str(error))
        print(f"Invalid input: {error}", file=sys.stderr)
        status = EXIT_VALIDATION
    except NumericalError as error:
        Logger.error(LOG_ENTRY, str(error))
        print(f"Numerical failure: {error}", file=sys.stderr)
        status = EXIT_NUMERICAL

    out_dir.mkdir(parents=True, exist_ok=True)
    Logger.dump(str(out_dir / f"{args.command}_manifest.json"))
    return status


if __name__ == "__main__":
    sys.exit(main())
