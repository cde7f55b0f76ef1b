"""Penalized single-index estimation of optimal treatment regimes with honest inference.

The main entry points are :func:`fit_cv` (penalized index coefficient),
:func:`infer` (debiased estimates and intervals) and :func:`group_test`
(bootstrap test of a coefficient group).
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .bootstrap import GroupTestResult, GroupTestSpec, critical_value, group_test
from .data import (OBSERVATIONAL, RANDOMIZED, Dataset, ModifiedResponse, add_interactions,
                   load_csv, modify_response, standardize, write_csv)
from .debias import DebiasResult, build_theta, infer, marginal_ci
from .errors import HonestOTRError
from .estimator import (EstimatorConfig, FitResult, cross_validate, fit, fit_cv, lambda_grid,
                        project_l1, proximal_step, score, soft_threshold)
from .propensity import PropensityFit, fit_propensity, obs_pipeline
from .simulation import (MonteCarloReport, ScenarioSpec, generate, match_ratio,
                         run_monte_carlo, support_metrics, value_estimate)
from .smoother import bandwidth, loo_smooth

__all__ = [
    "BACKEND", "Dataset", "DebiasResult", "EstimatorConfig", "FitResult", "GroupTestResult",
    "GroupTestSpec", "HonestOTRError", "ModifiedResponse", "MonteCarloReport", "OBSERVATIONAL",
    "PropensityFit", "RANDOMIZED", "ScenarioSpec", "add_interactions", "bandwidth",
    "build_theta", "critical_value", "cross_validate", "fit", "fit_cv", "fit_propensity",
    "generate", "group_test", "infer", "lambda_grid", "load_csv", "loo_smooth", "marginal_ci",
    "match_ratio", "modify_response", "obs_pipeline", "project_l1", "proximal_step",
    "run_monte_carlo", "score", "soft_threshold", "standardize", "support_metrics",
    "value_estimate", "write_csv",
]
