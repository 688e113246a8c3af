"""Partial identification of shifted-population estimands from selected samples.

Bounds on means, conditional means, and M-estimand coordinates over a set
of density ratios pinned down by moment conditions, with chi-squared DRO
baselines, bootstrap and influence-function inference, and a reproducible
synthetic experiment harness.
"""

from . import errors
from .convex import solve_bound
from .data import (
    ColumnSpec,
    ConditionalMean,
    Dataset,
    DiscreteATE,
    MCoefficient,
    Mean,
    MomentConstraint,
    ProblemSpec,
    StratumTable,
    build_strata,
    covariance_sign,
    load_dataset,
    moment,
    normalization_constraint,
    selection_floor,
)
from .dgp import (
    SyntheticDGP,
    mc_true_coefficient,
    simulate_regression_substitute,
    simulate_synthetic,
    true_value_exact,
)
from .dro import (
    DroSpec,
    chi2_divergence,
    dro_interval,
    dro_mean_bound,
    rho_observable,
    rho_omniscient,
)
from .experiment import (
    grid_config,
    run_experiment,
    validate_config,
    write_results,
)
from .inference import (
    BoundEstimate,
    IdentificationInterval,
    bootstrap_bounds,
    identification_interval,
    normal_ci,
    sample_split,
)
from .lp import LinearProgram, LPSolution, simplex_solve
from .ratios import RatioModel, linear_basis, separable, tabular, targeted
from .solver import SolverSettings, solve_nonconvex_bound
from .svgplot import emit_plot

__version__ = "0.1.0"

__all__ = [
    "BoundEstimate",
    "ColumnSpec",
    "ConditionalMean",
    "Dataset",
    "DiscreteATE",
    "DroSpec",
    "IdentificationInterval",
    "LPSolution",
    "LinearProgram",
    "MCoefficient",
    "Mean",
    "MomentConstraint",
    "ProblemSpec",
    "RatioModel",
    "SolverSettings",
    "StratumTable",
    "SyntheticDGP",
    "bootstrap_bounds",
    "build_strata",
    "chi2_divergence",
    "covariance_sign",
    "dro_interval",
    "dro_mean_bound",
    "emit_plot",
    "errors",
    "grid_config",
    "identification_interval",
    "linear_basis",
    "load_dataset",
    "mc_true_coefficient",
    "moment",
    "normal_ci",
    "normalization_constraint",
    "rho_observable",
    "rho_omniscient",
    "run_experiment",
    "sample_split",
    "selection_floor",
    "separable",
    "simplex_solve",
    "simulate_regression_substitute",
    "simulate_synthetic",
    "solve_bound",
    "solve_nonconvex_bound",
    "tabular",
    "targeted",
    "true_value_exact",
    "validate_config",
    "write_results",
]
