from typing import Tuple

import numpy as np

from causal_ssm.errors import NumericalError
from causal_ssm.graph.adjacency import is_complete, validate_adjacency
from causal_ssm.linalg import symmetrize

MAX_SWEEPS = 100
TOLERANCE = 1e-8


def fit_graph_covariance(
    scatter: np.ndarray, adjacency: np.ndarray, max_sweeps: int = MAX_SWEEPS, tol: float = TOLERANCE
) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Maximum likelihood covariance with graph-constrained precision for a given scatter matrix.

    Cycles over the nodes, regressing each one on its neighbours only, until the fitted
    covariance stops changing. The fitted covariance agrees with the scatter on the
    diagonal and on every edge, and its inverse is zero off the graph.

    Args:
        scatter (np.ndarray): Positive definite scatter (or covariance) matrix.
        adjacency (np.ndarray): Store graph.
        max_sweeps (int): Maximum number of passes over the nodes.
        tol (float): Convergence tolerance on the largest change, relative to the scatter scale.

    Returns:
        Tuple[np.ndarray, np.ndarray, int]: Fitted covariance, its precision and the number of sweeps.

    Raises:
        NumericalError: If a node regression meets a non positive residual variance.
    """

    adjacency = validate_adjacency(adjacency)
    scatter = symmetrize(np.asarray(scatter, dtype=float))
    size = scatter.shape[0]
    if is_complete(adjacency):
        return scatter.copy(), symmetrize(np.linalg.inv(scatter)), 0

    scale = max(1.0, float(np.max(np.abs(scatter))))
    fitted = scatter.copy()
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        previous = fitted.copy()
        for node in range(size):
            others = np.delete(np.arange(size), node)
            neighbours = others[adjacency[node, others] != 0]
            coefficients = np.zeros(size - 1)
            if neighbours.size:
                mask = np.isin(others, neighbours)
                coefficients[mask] = np.linalg.solve(
                    fitted[np.ix_(neighbours, neighbours)], scatter[neighbours, node]
                )
            column = fitted[np.ix_(others, others)] @ coefficients
            fitted[others, node] = column
            fitted[node, others] = column
        if np.max(np.abs(fitted - previous)) < tol * scale:
            break

    precision = np.zeros((size, size))
    for node in range(size):
        others = np.delete(np.arange(size), node)
        neighbours = others[adjacency[node, others] != 0]
        coefficients = np.zeros(size - 1)
        if neighbours.size:
            mask = np.isin(others, neighbours)
            coefficients[mask] = np.linalg.solve(fitted[np.ix_(neighbours, neighbours)], scatter[neighbours, node])
        residual = scatter[node, node] - fitted[others, node] @ coefficients
        if residual <= 0.0:
            raise NumericalError(f"Non positive residual variance for node {node} while fitting the graph")
        precision[node, node] = 1.0 / residual
        precision[others, node] = -coefficients / residual
    return symmetrize(fitted), symmetrize(precision), sweeps


def project_to_graph(covariance: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    """
    Covariance whose precision respects the graph, keeping the entries on the graph unchanged.
    """

    fitted, _, _ = fit_graph_covariance(covariance, adjacency)
    return fitted
