from causal_ssm.graph.adjacency import (
    complete_adjacency,
    connected_blocks,
    is_complete,
    is_graph_feasible,
    path_adjacency,
    validate_adjacency,
)
from causal_ssm.graph.decomposable import CliqueStep, is_decomposable, perfect_sequence
from causal_ssm.graph.gwishart import gwishart_mean_complete, sample_gwishart
from causal_ssm.graph.ips import fit_graph_covariance, project_to_graph

__all__ = [
    "CliqueStep",
    "complete_adjacency",
    "connected_blocks",
    "fit_graph_covariance",
    "gwishart_mean_complete",
    "is_complete",
    "is_decomposable",
    "is_graph_feasible",
    "path_adjacency",
    "perfect_sequence",
    "project_to_graph",
    "sample_gwishart",
    "validate_adjacency",
]
