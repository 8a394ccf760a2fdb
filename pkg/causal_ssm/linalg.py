import numpy as np
import scipy.linalg

from causal_ssm.errors import NumericalError, ValidationError

PSD_TOLERANCE = 1e-10


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) / 2.0


def is_symmetric(matrix: np.ndarray, tol: float = 1e-8) -> bool:
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    return bool(np.allclose(matrix, matrix.T, atol=tol * scale, rtol=0.0))


def min_eigenvalue(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(symmetrize(matrix))[0])


def check_psd(name: str, matrix: np.ndarray, tol: float = PSD_TOLERANCE) -> None:
    """
    Validate that a matrix is symmetric positive semi-definite.

    Raises:
        ValidationError: If the matrix is not square, not symmetric or has an eigenvalue below -tol.
    """

    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {matrix.shape}")
    if not is_symmetric(matrix):
        raise ValidationError(f"{name} must be symmetric")
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    if min_eigenvalue(matrix) < -tol * scale:
        raise ValidationError(f"{name} must be positive semi-definite")


def psd_factor(matrix: np.ndarray) -> np.ndarray:
    """
    Return F with F F' = matrix for a symmetric positive semi-definite matrix.

    An eigendecomposition is used so singular covariances (zero noise blocks) are accepted.
    """

    if matrix.size == 0:
        return matrix.copy()
    values, vectors = np.linalg.eigh(symmetrize(matrix))
    return vectors * np.sqrt(np.clip(values, 0.0, None))


def sym_sqrt(matrix: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(symmetrize(matrix))
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def sym_inv_sqrt(matrix: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(symmetrize(matrix))
    if values[0] <= 0.0:
        raise NumericalError("Inverse square root requested for a matrix that is not positive definite")
    return (vectors / np.sqrt(values)) @ vectors.T


def spd_inverse(matrix: np.ndarray) -> np.ndarray:
    """
    Invert a symmetric positive definite matrix through its Cholesky factor.

    Raises:
        NumericalError: If the matrix is not positive definite.
    """

    try:
        factor = scipy.linalg.cho_factor(symmetrize(matrix), lower=True)
    except np.linalg.LinAlgError as error:
        raise NumericalError(f"Matrix is not positive definite: {error}") from error
    return symmetrize(scipy.linalg.cho_solve(factor, np.eye(matrix.shape[0])))


def logdet_spd(matrix: np.ndarray) -> float:
    try:
        factor = scipy.linalg.cholesky(symmetrize(matrix), lower=True)
    except np.linalg.LinAlgError as error:
        raise NumericalError(f"Matrix is not positive definite: {error}") from error
    return float(2.0 * np.sum(np.log(np.diag(factor))))
