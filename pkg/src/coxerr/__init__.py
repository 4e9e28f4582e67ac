"""Cox proportional hazards estimation with covariate measurement error.

Simultaneous estimation of the baseline hazard (a nonnegative Lipschitz
function) and the regression parameter from censored data whose covariates
carry additive error with known moment generating function, plus asymptotic
confidence sets: an ellipsoid for the regression parameter and intervals for
integral functionals of the hazard.
"""

from coxerr.error_models import (
    BoundedUniformError,
    ErrorModel,
    GaussianError,
    NoError,
    ShiftedPoissonError,
    mgf,
    mgf_grad,
    mgf_hess,
    series_growth_coef,
)
from coxerr.estimator import FitConfig, FitResult, fit_corrected, fit_modified
from coxerr.hazard_grid import GridFunction, project
from coxerr.inference import (
    BetaInference,
    FunctionalInference,
    beta_confidence,
    build_plugins,
    fredholm_solve,
    functional_interval,
)
from coxerr.kaplan_meier import StepSurvival, km_censor
from coxerr.likelihood import LikelihoodContext, objective, q_single
from coxerr.simulate import CovariateLaw, Dataset, TrueModel, draw_dataset

__version__ = "0.1.0"

__all__ = [
    "BetaInference",
    "BoundedUniformError",
    "CovariateLaw",
    "Dataset",
    "ErrorModel",
    "FitConfig",
    "FitResult",
    "FunctionalInference",
    "GaussianError",
    "GridFunction",
    "LikelihoodContext",
    "NoError",
    "ShiftedPoissonError",
    "StepSurvival",
    "TrueModel",
    "beta_confidence",
    "build_plugins",
    "draw_dataset",
    "fit_corrected",
    "fit_modified",
    "fredholm_solve",
    "functional_interval",
    "km_censor",
    "mgf",
    "mgf_grad",
    "mgf_hess",
    "objective",
    "project",
    "q_single",
    "series_growth_coef",
]
