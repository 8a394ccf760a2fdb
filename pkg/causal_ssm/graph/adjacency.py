from typing import List

import networkx as nx
import numpy as np

from causal_ssm.errors import ValidationError

GRAPH_TOLERANCE = 1e-8


def validate_adjacency(adjacency: np.ndarray) -> np.ndarray:
    """
    Validate a store graph given as a binary adjacency matrix.

    Args:
        adjacency (np.ndarray): Square 0/1 matrix.

    Returns:
        np.ndarray: The adjacency as an integer array.

    Raises:
        ValidationError: If the matrix is not square, binary, symmetric or has a zero on the diagonal.
    """

    adjacency = np.asarray(adjacency)
    if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise ValidationError(f"Adjacency must be square, got shape {adjacency.shape}")
    if not np.isin(adjacency, (0, 1)).all():
        raise ValidationError("Adjacency entries must be 0 or 1")
    if not np.array_equal(adjacency, adjacency.T):
        raise ValidationError("Adjacency must be symmetric")
    if not np.all(np.diag(adjacency) == 1):
        raise ValidationError("Adjacency must have ones on the diagonal")
    return adjacency.astype(int)


def path_adjacency(size: int) -> np.ndarray:
    """
    Adjacency of nodes on a line, each connected to its nearest neighbours.
    """

    return (np.abs(np.subtract.outer(np.arange(size), np.arange(size))) <= 1).astype(int)


def complete_adjacency(size: int) -> np.ndarray:
    return np.ones((size, size), dtype=int)


def to_networkx(adjacency: np.ndarray) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(adjacency.shape[0]))
    rows, cols = np.nonzero(np.triu(adjacency, k=1))
    graph.add_edges_from(zip(rows.tolist(), cols.tolist()))
    return graph


def is_complete(adjacency: np.ndarray) -> bool:
    return bool(np.all(adjacency == 1))


def non_edges(adjacency: np.ndarray) -> np.ndarray:
    """
    Mask of the off-diagonal pairs that are not connected.
    """

    return np.asarray(adjacency) == 0


def is_graph_feasible(precision: np.ndarray, adjacency: np.ndarray, tol: float = GRAPH_TOLERANCE) -> bool:
    """
    Check that a precision matrix has (numerical) zeros on every non-edge.
    """

    scale = max(1.0, float(np.max(np.abs(precision))))
    return bool(np.all(np.abs(precision[non_edges(adjacency)]) <= tol * scale))


def connected_blocks(adjacency: np.ndarray) -> List[List[int]]:
    """
    Node indices of every connected component, each sorted, ordered by first node.
    """

    components = [sorted(component) for component in nx.connected_components(to_networkx(adjacency))]
    return sorted(components, key=lambda component: component[0])
