from causal_ssm.state_space.kalman import (
    backward_smoother,
    kalman_filter,
    log_likelihood,
    simulate_system,
    simulation_smoother,
    smoothed_means,
)
from causal_ssm.state_space.models import FilterState, SmoothedMoments, StateSpaceSystem

__all__ = [
    "FilterState",
    "SmoothedMoments",
    "StateSpaceSystem",
    "backward_smoother",
    "kalman_filter",
    "log_likelihood",
    "simulate_system",
    "simulation_smoother",
    "smoothed_means",
]
