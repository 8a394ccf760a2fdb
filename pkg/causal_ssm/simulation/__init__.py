from causal_ssm.simulation.harness import (
    Experiment,
    ExperimentSettings,
    ReplicationResult,
    differences_async,
    generate_panel,
    ks_async,
    replicate,
    replicate_async,
    replicate_ks_table,
    replicate_selection_paths,
    replicate_table2,
    selection_paths_async,
)
from causal_ssm.simulation.models import SimConfig, SimulatedPanel

__all__ = [
    "Experiment",
    "ExperimentSettings",
    "ReplicationResult",
    "SimConfig",
    "SimulatedPanel",
    "differences_async",
    "generate_panel",
    "ks_async",
    "replicate",
    "replicate_async",
    "replicate_ks_table",
    "replicate_selection_paths",
    "replicate_table2",
    "selection_paths_async",
]
