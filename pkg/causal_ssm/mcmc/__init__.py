from causal_ssm.mcmc.diagnostics import (
    diagnostics_table,
    inefficiency_factor,
    write_chain_summary,
    write_diagnostics,
)
from causal_ssm.mcmc.models import GWishartPrior, McmcConfig, PosteriorDraws
from causal_ssm.mcmc.sampler import (
    impute_missing,
    run_chain,
    sample_covariances,
    sample_d,
    sample_phi_mh,
    sample_states,
    var_log_likelihood,
)
from causal_ssm.mcmc.univariate import combine_univariate, run_univariate_arm, run_univariate_chain

__all__ = [
    "GWishartPrior",
    "McmcConfig",
    "PosteriorDraws",
    "combine_univariate",
    "diagnostics_table",
    "impute_missing",
    "inefficiency_factor",
    "run_chain",
    "run_univariate_arm",
    "run_univariate_chain",
    "sample_covariances",
    "sample_d",
    "sample_phi_mh",
    "sample_states",
    "var_log_likelihood",
    "write_chain_summary",
    "write_diagnostics",
]
