"""Penalised quasi-likelihood model selection for affine causal time series."""

from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    NonStationaryError,
    NumericalError,
    OptimizationFailed,
    SelectionFailed,
)
from .likelihood import LikelihoodValue, lhat_n, qhat_t
from .models import (
    ConditionalMoments,
    ModelFamily,
    ModelSpec,
    ParamVector,
    build_collection,
    check_theta_r,
    hat_moments,
)
from .montecarlo import (
    ExperimentConfig,
    ExperimentReport,
    lil_summary,
    overfit_gap_summary,
    run_experiment,
    trend_test,
)
from .qmle import FitOptions, FitResult, fit
from .selection import (
    AIC,
    BIC,
    Custom,
    LogLogPower,
    PenaltyRule,
    PowerLaw,
    SelectionReport,
    criterion,
    fit_collection,
    parse_penalty,
    score,
    select,
)
from .simulate import InnovationLaw, Trajectory, simulate

__version__ = "0.1.0"

__all__ = [
    "AIC",
    "BIC",
    "ConditionalMoments",
    "ConfigError",
    "Custom",
    "DataError",
    "DivergenceError",
    "ExperimentConfig",
    "ExperimentReport",
    "FitOptions",
    "FitResult",
    "InnovationLaw",
    "LikelihoodValue",
    "LogLogPower",
    "ModelFamily",
    "ModelSpec",
    "NonStationaryError",
    "NumericalError",
    "OptimizationFailed",
    "ParamVector",
    "PenaltyRule",
    "PowerLaw",
    "SelectionFailed",
    "SelectionReport",
    "Trajectory",
    "build_collection",
    "check_theta_r",
    "criterion",
    "fit",
    "fit_collection",
    "hat_moments",
    "lhat_n",
    "lil_summary",
    "overfit_gap_summary",
    "parse_penalty",
    "qhat_t",
    "run_experiment",
    "score",
    "select",
    "simulate",
    "trend_test",
]
