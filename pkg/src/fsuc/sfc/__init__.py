"""Secondary-frequency-control reserve sizing from historical data."""

from .stats import (
    DIRECTIONS,
    DOWN,
    UP,
    HistoryRecord,
    MarginalModel,
    compute_a2,
    fit_marginal,
    forecast_intervals,
    load_history,
    records_matrix,
    save_history,
)
from .copulas import FAMILIES, CopulaFitError, FittedCopula, fit_copula, pseudo_observations, select_copula
from .conditional import (
    ConditionalModel,
    ConditioningWindow,
    EmptyWindowError,
    JointModel,
    conditional_density,
    sample_conditional,
)
from .drcc import AmbiguityConfig, DrccCertificate, drcc_certify, empirical_cvar, select_epsilon
from .requirement import RequirementResult, compute_requirement, fit_joint

__all__ = [
    "AmbiguityConfig",
    "ConditionalModel",
    "ConditioningWindow",
    "CopulaFitError",
    "DIRECTIONS",
    "DOWN",
    "DrccCertificate",
    "EmptyWindowError",
    "FAMILIES",
    "FittedCopula",
    "HistoryRecord",
    "JointModel",
    "MarginalModel",
    "RequirementResult",
    "UP",
    "compute_a2",
    "compute_requirement",
    "conditional_density",
    "drcc_certify",
    "empirical_cvar",
    "fit_copula",
    "fit_joint",
    "fit_marginal",
    "forecast_intervals",
    "load_history",
    "pseudo_observations",
    "records_matrix",
    "sample_conditional",
    "save_history",
    "select_copula",
    "select_epsilon",
]
