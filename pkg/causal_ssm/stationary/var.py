from typing import Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.stats import norm

from causal_ssm.errors import NumericalError, ValidationError
from causal_ssm.linalg import sym_inv_sqrt, sym_sqrt, symmetrize
from causal_ssm.stationary.models import MIN_LOG_DIAG, StationaryVarParams, n_lower

STABILITY_TOLERANCE = 1e-10


def lower_matrix(entries: np.ndarray, size: int) -> np.ndarray:
    """
    Matrix with the given entries, row-major, below the diagonal and zeros elsewhere.
    """

    matrix = np.zeros((size, size))
    matrix[np.tril_indices(size, k=-1)] = entries
    return matrix


def skew_matrix(entries: np.ndarray, size: int) -> np.ndarray:
    lower = lower_matrix(entries, size)
    return lower - lower.T


def reflection(reflect: int, size: int) -> np.ndarray:
    sign = np.ones(size)
    if reflect and size:
        sign[0] = -1.0
    return np.diag(sign)


def cayley_orthogonal(skew_lower: np.ndarray, reflect: int, size: Optional[int] = None) -> np.ndarray:
    """
    Orthogonal matrix O = E [(I - G)(I + G)^-1]^2 from a skew-symmetric G.

    Args:
        skew_lower (np.ndarray): Strictly lower entries of G, row-major.
        reflect (int): 1 to flip the sign of the first row.
        size (Optional[int]): Dimension, inferred from the number of entries when omitted.

    Returns:
        np.ndarray: The orthogonal matrix.
    """

    skew_lower = np.atleast_1d(np.asarray(skew_lower, dtype=float))
    if size is None:
        size = int(round((1 + np.sqrt(1 + 8 * skew_lower.size)) / 2))
    if skew_lower.size != n_lower(size):
        raise ValidationError(f"Expected {n_lower(size)} skew entries for dimension {size}, got {skew_lower.size}")

    identity = np.eye(size)
    skew = skew_matrix(skew_lower, size)
    cayley = np.linalg.solve((identity + skew).T, (identity - skew).T).T
    return reflection(reflect, size) @ cayley @ cayley


def to_phi(params: StationaryVarParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Map unrestricted parameters to a Schur-stable Phi and its stationary covariance.

    Args:
        params (StationaryVarParams): The unrestricted parameters.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Phi and U, with U = Phi U Phi' + M.
    """

    size = params.size
    lower = np.eye(size) + lower_matrix(params.chol_lower, size)
    inner = symmetrize((lower * np.exp(params.log_diag)) @ lower.T)
    stationary = symmetrize(inner + params.anchor)
    orthogonal = cayley_orthogonal(params.skew_lower, params.reflect, size)
    phi = sym_sqrt(inner) @ orthogonal @ sym_inv_sqrt(stationary)
    return phi, stationary


def spectral_radius(phi: np.ndarray) -> float:
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(phi))))


def is_schur_stable(phi: np.ndarray, tol: float = STABILITY_TOLERANCE) -> bool:
    """
    True if every eigenvalue lies strictly inside the unit circle, boundary roots within tol count as unstable.
    """

    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise ValidationError(f"Expected a square matrix, got shape {phi.shape}")
    return spectral_radius(phi) < 1.0 - tol


def solve_yule_walker(phi: np.ndarray, anchor: np.ndarray) -> np.ndarray:
    """
    Stationary covariance U solving U = Phi U Phi' + M.

    Raises:
        NumericalError: If Phi is not Schur-stable.
    """

    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    anchor = np.atleast_2d(np.asarray(anchor, dtype=float))
    if not is_schur_stable(phi):
        raise NumericalError(f"VAR coefficient with spectral radius {spectral_radius(phi):.6g} is not stationary")
    return symmetrize(scipy.linalg.solve_discrete_lyapunov(phi, anchor, method="direct"))


def random_params(
    size: int, anchor: np.ndarray, rng: np.random.Generator, prior_variance: float = 5.0
) -> StationaryVarParams:
    """
    Draw parameters from their prior, independent N(0, prior_variance) and a fair reflection flag.
    """

    scale = np.sqrt(prior_variance)
    k = n_lower(size)
    return StationaryVarParams(
        chol_lower=rng.normal(0.0, scale, k),
        log_diag=rng.normal(0.0, scale, size),
        skew_lower=rng.normal(0.0, scale, k),
        reflect=int(rng.integers(0, 2)),
        anchor=anchor,
    )


def log_prior(params: StationaryVarParams, prior_variance: float = 5.0) -> float:
    return float(np.sum(norm.logpdf(params.to_vector(), scale=np.sqrt(prior_variance))) + np.log(0.5))


def initial_params(phi: np.ndarray, anchor: np.ndarray) -> StationaryVarParams:
    """
    Starting parameters whose V matches a given Phi, with G = 0.

    The Cholesky part is read off V = Phi U Phi' when Phi is stable and V is positive
    definite, otherwise every continuous parameter starts at zero.
    """

    size = anchor.shape[0]
    zeros = StationaryVarParams(
        chol_lower=np.zeros(n_lower(size)),
        log_diag=np.zeros(size),
        skew_lower=np.zeros(n_lower(size)),
        reflect=0,
        anchor=anchor,
    )
    if not is_schur_stable(phi):
        return zeros
    stationary = solve_yule_walker(phi, anchor)
    inner = symmetrize(phi @ stationary @ phi.T)
    try:
        factor = np.linalg.cholesky(inner)
    except np.linalg.LinAlgError:
        return zeros
    diag = np.diag(factor)
    lower = factor / diag
    return StationaryVarParams(
        chol_lower=lower[np.tril_indices(size, k=-1)],
        log_diag=np.maximum(2.0 * np.log(diag), MIN_LOG_DIAG),
        skew_lower=np.zeros(n_lower(size)),
        reflect=0,
        anchor=anchor,
    )
