import dataclasses
from typing import List

import networkx as nx
import numpy as np

from causal_ssm.graph.adjacency import to_networkx


@dataclasses.dataclass
class CliqueStep:
    """
    One step of a perfect sequence of cliques.

    Attributes:
        clique (List[int]): Nodes of the clique, sorted.
        separator (List[int]): Nodes shared with earlier cliques, sorted, empty when none are shared.
        residual (List[int]): Clique nodes outside the separator.
    """

    clique: List[int]
    separator: List[int]
    residual: List[int]


def is_decomposable(adjacency: np.ndarray) -> bool:
    return bool(nx.is_chordal(to_networkx(adjacency)))


def perfect_sequence(adjacency: np.ndarray) -> List[CliqueStep]:
    """
    Order the maximal cliques of a decomposable graph so that every separator lies in one earlier clique.

    The order comes from a breadth-first walk over a maximum-weight spanning tree of the
    clique intersection graph, which is a junction tree for chordal graphs.

    Args:
        adjacency (np.ndarray): Adjacency of a decomposable graph.

    Returns:
        List[CliqueStep]: Cliques with their separators, in perfect order.
    """

    graph = to_networkx(adjacency)
    cliques = sorted((sorted(clique) for clique in nx.chordal_graph_cliques(graph)), key=lambda clique: clique)

    junction = nx.Graph()
    junction.add_nodes_from(range(len(cliques)))
    for i, first in enumerate(cliques):
        for j in range(i + 1, len(cliques)):
            junction.add_edge(i, j, weight=len(set(first) & set(cliques[j])))
    tree = nx.maximum_spanning_tree(junction)

    if not cliques:
        return []
    steps = [CliqueStep(clique=cliques[0], separator=[], residual=cliques[0])]
    for parent, child in nx.bfs_edges(tree, 0):
        separator = sorted(set(cliques[child]) & set(cliques[parent]))
        residual = [node for node in cliques[child] if node not in separator]
        steps.append(CliqueStep(clique=cliques[child], separator=separator, residual=residual))
    return steps
