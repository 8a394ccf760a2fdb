from causal_ssm.stationary.models import StationaryVarParams
from causal_ssm.stationary.var import (
    cayley_orthogonal,
    initial_params,
    is_schur_stable,
    log_prior,
    random_params,
    solve_yule_walker,
    spectral_radius,
    to_phi,
)

__all__ = [
    "StationaryVarParams",
    "cayley_orthogonal",
    "initial_params",
    "is_schur_stable",
    "log_prior",
    "random_params",
    "solve_yule_walker",
    "spectral_radius",
    "to_phi",
]
