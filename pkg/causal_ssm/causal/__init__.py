from causal_ssm.causal.estimands import (
    difference_estimand,
    ks_thresholds,
    ks_trajectories,
    nearest_rank,
    one_sided_ks,
    predict_counterfactuals,
    predictive_draws,
)
from causal_ssm.causal.models import (
    CausalConfig,
    CausalReport,
    CausalRow,
    CounterfactualSet,
    DifferenceSummary,
    ModelArm,
)
from causal_ssm.causal.pipeline import (
    CausalPipeline,
    RegionResult,
    SelectedRegion,
    full_causal_pipeline,
    subset_priors,
)

__all__ = [
    "CausalConfig",
    "CausalPipeline",
    "CausalReport",
    "CausalRow",
    "CounterfactualSet",
    "DifferenceSummary",
    "ModelArm",
    "RegionResult",
    "SelectedRegion",
    "difference_estimand",
    "full_causal_pipeline",
    "ks_thresholds",
    "ks_trajectories",
    "nearest_rank",
    "one_sided_ks",
    "predict_counterfactuals",
    "predictive_draws",
    "subset_priors",
]
