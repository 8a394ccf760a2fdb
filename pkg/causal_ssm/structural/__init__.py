from causal_ssm.structural.assemble import (
    apply_regression,
    assemble_system,
    assemble_univariate,
    extract_components,
    initial_moments,
    univariate_priors,
)
from causal_ssm.structural.models import (
    ComponentParams,
    CovariancePriors,
    SlopeMode,
    StructuralSpec,
    UnivariatePriors,
)

__all__ = [
    "ComponentParams",
    "CovariancePriors",
    "SlopeMode",
    "StructuralSpec",
    "UnivariatePriors",
    "apply_regression",
    "assemble_system",
    "assemble_univariate",
    "extract_components",
    "initial_moments",
    "univariate_priors",
]
