"""Valid-instrument discovery via permutation pseudo variables.

Given an exposure, an outcome, and a large set of candidate instruments, the
package screens candidates, fits debiased l1-penalized regressions, uses a
permuted copy of the candidates to locate and remove spuriously relevant
ones, finds the modal exposure/outcome ratio, and reports a two-stage least
squares estimate of the causal effect with a confidence interval.
"""

from .data import Dataset, RngStream, center, load_csv, partial_out_covariates
from .errors import (BudgetError, ConfigurationError, DataError,
                     DegeneracyError, DegeneracyWarning, DimensionError,
                     LinearAlgebraError, ParseError, PipelineError,
                     PseudoIVError)
from .estimation import (CausalEstimate, ols, split_ci, split_estimator,
                         split_variance, split_weight_matrix, tsls)
from .lasso import (DebiasedFit, LassoFit, NodewisePrecision, debias,
                    fit_lasso, fit_nodewise, theta_hats)
from .montecarlo import (MetricsRow, MonteCarloResult, ReplicateRecord,
                         export_histograms, monte_carlo, write_outputs)
from .pipeline import (PipelineResult, default_lambda, default_screen_size,
                       run_naive, run_proposed, run_split)
from .selection import (SelectionTrace, ThresholdPolicy, generate_pseudos,
                        joint_threshold, marginal_screen, mode_find,
                        ratio_estimates, remove_spurious,
                        se_ratio_difference, vote_naive)
from .simgen import (PRESET_NAMES, ScenarioConfig, c_star, c_tilde,
                     gen_dataset, preset)

__version__ = "0.1.0"

__all__ = [
    "BudgetError", "CausalEstimate", "ConfigurationError", "DataError",
    "Dataset", "DebiasedFit", "DegeneracyError", "DegeneracyWarning",
    "DimensionError", "LassoFit", "LinearAlgebraError", "MetricsRow",
    "MonteCarloResult", "NodewisePrecision", "PRESET_NAMES", "ParseError",
    "PipelineError", "PipelineResult", "PseudoIVError", "ReplicateRecord",
    "RngStream", "ScenarioConfig", "SelectionTrace", "ThresholdPolicy",
    "c_star", "c_tilde", "center", "debias", "default_lambda",
    "default_screen_size", "export_histograms", "fit_lasso", "fit_nodewise",
    "gen_dataset", "generate_pseudos", "joint_threshold", "load_csv",
    "marginal_screen", "mode_find", "monte_carlo", "ols",
    "partial_out_covariates", "preset", "ratio_estimates", "remove_spurious",
    "run_naive", "run_proposed", "run_split", "se_ratio_difference",
    "split_ci", "split_estimator", "split_variance", "split_weight_matrix",
    "theta_hats", "tsls", "vote_naive", "write_outputs",
]
