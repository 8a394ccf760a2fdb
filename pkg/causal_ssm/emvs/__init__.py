from causal_ssm.emvs.models import (
    EmvsState,
    EmvsVariant,
    PathRow,
    SelectionResult,
    SpikeSlabConfig,
    StateExpectations,
)
from causal_ssm.emvs.selector import (
    e_step_gamma,
    e_step_states,
    m_step_beta,
    m_step_covariances,
    m_step_phi,
    m_step_sigma,
    m_step_state_cov,
    m_step_theta,
    path_rows,
    q_value,
    residual_scatter,
    run_emvs,
    select_coefficients,
    selection_threshold,
    state_noise_scatter,
    v0_grid_scan,
    v0_grid_scan_async,
    write_path_table,
)

__all__ = [
    "EmvsState",
    "EmvsVariant",
    "PathRow",
    "SelectionResult",
    "SpikeSlabConfig",
    "StateExpectations",
    "e_step_gamma",
    "e_step_states",
    "m_step_beta",
    "m_step_covariances",
    "m_step_phi",
    "m_step_sigma",
    "m_step_state_cov",
    "m_step_theta",
    "path_rows",
    "q_value",
    "residual_scatter",
    "run_emvs",
    "select_coefficients",
    "selection_threshold",
    "state_noise_scatter",
    "v0_grid_scan",
    "v0_grid_scan_async",
    "write_path_table",
]
