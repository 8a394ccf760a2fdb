import numpy as np
import pytest
from numpy.testing import assert_allclose

from causal_ssm.errors import ValidationError
from causal_ssm.graph import (
    complete_adjacency,
    connected_blocks,
    fit_graph_covariance,
    is_decomposable,
    is_graph_feasible,
    path_adjacency,
    perfect_sequence,
    project_to_graph,
    validate_adjacency,
)
from tests.oracles import random_spd

CYCLE = np.array([[1, 1, 0, 1], [1, 1, 1, 0], [0, 1, 1, 1], [1, 0, 1, 1]])
SCATTER = np.array([[10.0, 1.0, 5.0, 4.0], [1.0, 10.0, 2.0, 6.0], [5.0, 2.0, 10.0, 3.0], [4.0, 6.0, 3.0, 10.0]])


def test_fit_matches_scatter_on_edges_and_zeroes_precision_elsewhere() -> None:
    fitted, precision, sweeps = fit_graph_covariance(SCATTER, CYCLE)
    edges = CYCLE == 1

    assert 0 < sweeps <= 100
    assert_allclose(fitted[edges], SCATTER[edges], atol=1e-6)
    assert precision[0, 2] == 0.0
    assert precision[1, 3] == 0.0
    assert_allclose(precision @ fitted, np.eye(4), atol=1e-6)


def test_complete_graph_returns_input() -> None:
    scatter = random_spd(np.random.default_rng(0), 3)
    fitted, precision, sweeps = fit_graph_covariance(scatter, complete_adjacency(3))

    assert sweeps == 0
    assert_allclose(fitted, scatter)
    assert_allclose(precision, np.linalg.inv(scatter))


def test_path_graph_projection() -> None:
    covariance = random_spd(np.random.default_rng(1), 3)
    projected = project_to_graph(covariance, path_adjacency(3))

    assert abs(np.linalg.inv(projected)[0, 2]) < 1e-8
    assert is_graph_feasible(np.linalg.inv(projected), path_adjacency(3))
    assert_allclose(np.diag(projected), np.diag(covariance), atol=1e-8)
    assert projected[0, 1] == pytest.approx(covariance[0, 1], abs=1e-6)


def test_fit_is_the_constrained_maximum_likelihood() -> None:
    rng = np.random.default_rng(2)
    scatter = random_spd(rng, 4)
    _, precision, _ = fit_graph_covariance(scatter, path_adjacency(4))

    def objective(candidate: np.ndarray) -> float:
        return float(np.linalg.slogdet(candidate)[1] - np.trace(candidate @ scatter))

    best = objective(precision)
    for _ in range(50):
        nudge = np.diag(rng.normal(0, 1e-3, 4))
        nudge[0, 1] = nudge[1, 0] = rng.normal(0, 1e-3)
        assert objective(precision + nudge) <= best + 1e-9


def test_adjacency_validation() -> None:
    with pytest.raises(ValidationError):
        validate_adjacency(np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValidationError):
        validate_adjacency(np.array([[0, 1], [1, 1]]))
    with pytest.raises(ValidationError):
        validate_adjacency(np.array([[1, 2], [2, 1]]))


def test_path_adjacency() -> None:
    expected = np.array(
        [
            [1, 1, 0, 0, 0],
            [1, 1, 1, 0, 0],
            [0, 1, 1, 1, 0],
            [0, 0, 1, 1, 1],
            [0, 0, 0, 1, 1],
        ]
    )
    assert np.array_equal(path_adjacency(5), expected)


def test_decomposability() -> None:
    assert is_decomposable(path_adjacency(5))
    assert is_decomposable(np.eye(3, dtype=int))
    assert not is_decomposable(CYCLE)


def test_perfect_sequence_of_path() -> None:
    steps = perfect_sequence(path_adjacency(4))

    assert [step.clique for step in steps] == [[0, 1], [1, 2], [2, 3]]
    assert [step.separator for step in steps] == [[], [1], [2]]
    assert [step.residual for step in steps] == [[0, 1], [2], [3]]


def test_perfect_sequence_running_intersection() -> None:
    adjacency = np.array(
        [
            [1, 1, 1, 0, 0, 0],
            [1, 1, 1, 1, 0, 0],
            [1, 1, 1, 1, 0, 0],
            [0, 1, 1, 1, 0, 0],
            [0, 0, 0, 0, 1, 1],
            [0, 0, 0, 0, 1, 1],
        ]
    )
    steps = perfect_sequence(adjacency)
    seen = set()
    for step in steps:
        assert set(step.separator) == set(step.clique) & seen
        seen |= set(step.clique)
    assert seen == set(range(6))


def test_connected_blocks() -> None:
    adjacency = np.eye(4, dtype=int)
    adjacency[0, 2] = adjacency[2, 0] = 1

    assert connected_blocks(adjacency) == [[0, 2], [1], [3]]
