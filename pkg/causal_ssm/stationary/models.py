import dataclasses

import numpy as np

from causal_ssm.errors import ValidationError
from causal_ssm.linalg import check_psd

# Lower bound on the log-diagonal, rank-deficient V is not handled.
MIN_LOG_DIAG = -30.0


def n_lower(size: int) -> int:
    return size * (size - 1) // 2


@dataclasses.dataclass
class StationaryVarParams:
    """
    Unrestricted parameters of a Schur-stable VAR(1) coefficient.

    V = L diag(exp(log_diag)) L' with L unit lower triangular, U = V + M, and
    Phi = V^1/2 O U^-1/2 with O the squared Cayley transform of the skew matrix G,
    reflected by E = I - 2 reflect e1 e1'.

    Attributes:
        chol_lower (np.ndarray): Strictly lower entries of L, n(n-1)/2 reals, row-major.
        log_diag (np.ndarray): Log of the diagonal of Lambda, n reals.
        skew_lower (np.ndarray): Strictly lower entries g of G, n(n-1)/2 reals, G[j, i] = -g.
        reflect (int): 0 or 1, flips the sign of the first row of O.
        anchor (np.ndarray): Fixed positive definite matrix M, shape (n, n).
    """

    chol_lower: np.ndarray
    log_diag: np.ndarray
    skew_lower: np.ndarray
    reflect: int
    anchor: np.ndarray

    def __post_init__(self) -> None:
        self.chol_lower = np.atleast_1d(np.asarray(self.chol_lower, dtype=float))
        self.log_diag = np.atleast_1d(np.asarray(self.log_diag, dtype=float))
        self.skew_lower = np.atleast_1d(np.asarray(self.skew_lower, dtype=float))
        self.anchor = np.atleast_2d(np.asarray(self.anchor, dtype=float))

        size = self.log_diag.size
        if self.anchor.shape != (size, size):
            raise ValidationError(f"Anchor has shape {self.anchor.shape}, expected {(size, size)}")
        if self.chol_lower.size != n_lower(size) or self.skew_lower.size != n_lower(size):
            raise ValidationError(f"Expected {n_lower(size)} lower-triangular entries for dimension {size}")
        if self.reflect not in (0, 1):
            raise ValidationError(f"Reflection flag must be 0 or 1, got {self.reflect}")
        check_psd("anchor", self.anchor)
        self.log_diag = np.maximum(self.log_diag, MIN_LOG_DIAG)

    @property
    def size(self) -> int:
        return int(self.log_diag.size)

    @property
    def n_free(self) -> int:
        """
        Number of continuous parameters, n^2.
        """

        return self.size * self.size

    def to_vector(self) -> np.ndarray:
        """
        Stack the continuous parameters as (chol_lower, log_diag, skew_lower).
        """

        return np.concatenate([self.chol_lower, self.log_diag, self.skew_lower])

    def from_vector(self, vector: np.ndarray, reflect: int) -> "StationaryVarParams":
        """
        Build parameters with the same anchor from a vector laid out like to_vector.
        """

        k = n_lower(self.size)
        return StationaryVarParams(
            chol_lower=vector[:k],
            log_diag=vector[k : k + self.size],
            skew_lower=vector[k + self.size :],
            reflect=reflect,
            anchor=self.anchor,
        )

    def with_anchor(self, anchor: np.ndarray) -> "StationaryVarParams":
        return dataclasses.replace(self, anchor=anchor)
