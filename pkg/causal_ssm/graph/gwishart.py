"""
G-Wishart sampling.

The density of the precision K is proportional to |K|^((b - 2) / 2) exp(-tr(K D) / 2) on
the positive definite matrices with zeros off the graph. On a complete graph this is the
Wishart law with b + n - 1 degrees of freedom and scale D^-1.
"""

import numpy as np
from scipy.stats import invwishart, wishart

from causal_ssm.errors import ValidationError
from causal_ssm.graph.adjacency import is_complete, validate_adjacency
from causal_ssm.graph.decomposable import is_decomposable, perfect_sequence
from causal_ssm.graph.ips import fit_graph_covariance
from causal_ssm.linalg import psd_factor, spd_inverse, symmetrize


def _wishart_precision(df: float, scale: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    size = scale.shape[0]
    draw = wishart.rvs(df=df + size - 1, scale=spd_inverse(scale), random_state=rng)
    return symmetrize(np.atleast_2d(draw))


def _inverse_wishart(df: float, scale: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return symmetrize(np.atleast_2d(invwishart.rvs(df=df, scale=symmetrize(scale), random_state=rng)))


def sample_decomposable(df: float, scale: np.ndarray, adjacency: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Exact draw for a decomposable graph, built clique by clique from the hyper inverse Wishart law.

    Every clique covariance has an inverse Wishart marginal with b + |C| - 1 degrees of freedom.
    Given the covariance on the separator, the remaining block is drawn through its Schur
    complement and the regression on the separator. The precision is assembled from the
    clique and separator inverses, so entries off the graph are exactly zero.
    """

    size = scale.shape[0]
    covariance = np.zeros((size, size))
    precision = np.zeros((size, size))
    for step in perfect_sequence(adjacency):
        clique_df = df + len(step.clique) - 1
        residual, separator = step.residual, step.separator
        if not separator:
            block = _inverse_wishart(clique_df, scale[np.ix_(residual, residual)], rng)
            covariance[np.ix_(residual, residual)] = block
        else:
            psi_ss = scale[np.ix_(separator, separator)]
            psi_sr = scale[np.ix_(separator, residual)]
            psi_ss_inv = spd_inverse(psi_ss)
            psi_schur = scale[np.ix_(residual, residual)] - psi_sr.T @ psi_ss_inv @ psi_sr
            schur = _inverse_wishart(clique_df, psi_schur, rng)

            noise = rng.standard_normal((len(separator), len(residual)))
            regression = psi_ss_inv @ psi_sr + psd_factor(psi_ss_inv) @ noise @ psd_factor(schur).T

            sigma_ss = covariance[np.ix_(separator, separator)]
            cross = sigma_ss @ regression
            covariance[np.ix_(separator, residual)] = cross
            covariance[np.ix_(residual, separator)] = cross.T
            covariance[np.ix_(residual, residual)] = symmetrize(schur + regression.T @ sigma_ss @ regression)
            precision[np.ix_(separator, separator)] -= spd_inverse(sigma_ss)

        clique = step.clique
        precision[np.ix_(clique, clique)] += spd_inverse(covariance[np.ix_(clique, clique)])
    return symmetrize(precision)


def sample_nondecomposable(df: float, scale: np.ndarray, adjacency: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Exact draw for any graph by completing an unrestricted draw.

    The precision is first drawn from the Wishart law of the complete graph with the same
    hyperparameters. Its inverse is then completed by cycling node regressions on the
    neighbours until it agrees with the draw on the diagonal and on every edge, and the
    inverse of the completion is the G-Wishart draw.
    """

    covariance = spd_inverse(_wishart_precision(df, scale, rng))
    _, precision, _ = fit_graph_covariance(covariance, adjacency)
    return precision


def sample_gwishart(
    df: float,
    scale: np.ndarray,
    adjacency: np.ndarray,
    rng: np.random.Generator,
    allow_nondecomposable: bool = False,
) -> np.ndarray:
    """
    Draw a precision matrix from the G-Wishart law W_G(df, scale).

    Args:
        df (float): Degrees of freedom b > 0.
        scale (np.ndarray): Positive definite scale D.
        adjacency (np.ndarray): Store graph.
        rng (np.random.Generator): Random generator.
        allow_nondecomposable (bool): Enable the sampler for graphs without a perfect clique sequence.

    Returns:
        np.ndarray: Positive definite precision with zeros off the graph.

    Raises:
        ValidationError: On invalid hyperparameters, or a non-decomposable graph when the fallback is disabled.
    """

    adjacency = validate_adjacency(adjacency)
    scale = symmetrize(np.atleast_2d(np.asarray(scale, dtype=float)))
    if df <= 0:
        raise ValidationError(f"G-Wishart degrees of freedom must be positive, got {df}")
    if scale.shape != adjacency.shape:
        raise ValidationError(f"Scale has shape {scale.shape}, graph has {adjacency.shape[0]} nodes")

    if is_complete(adjacency):
        return _wishart_precision(df, scale, rng)
    if is_decomposable(adjacency):
        return sample_decomposable(df, scale, adjacency, rng)
    if not allow_nondecomposable:
        raise ValidationError("Graph is not decomposable and the non-decomposable sampler is disabled")
    return sample_nondecomposable(df, scale, adjacency, rng)


def gwishart_mean_complete(df: float, scale: np.ndarray) -> np.ndarray:
    """
    Mean of W_G(df, scale) on a complete graph, (b + n - 1) D^-1.
    """

    return (df + scale.shape[0] - 1) * spd_inverse(scale)
