"""Individualized treatment rules for ordinal treatments.

Estimates a decision rule D(x) in {1..K} from observational or
randomized data (covariates, an ordinal treatment, a reward) by a
weighted large-margin fit on duplicated data: each subject appears once
per boundary k < K with label sign(a - k), and one shared decision
shape g plus per-boundary intercepts b_k yield the non-crossing rule
D(x) = 1 + sum_k I(g(x) + b_k > 0). Pairwise baselines, propensity
models, simulated benchmarks, and evaluation drivers are included; the
``ordinal-itr`` script exposes the same through the command line.
"""

from .baselines import BaselineRule, fit_owl, fit_pls_l1
from .core import Dataset, FittedRule, KernelSpec, modified_hinge, sign
from .duplication import (
    DuplicatedData,
    base_kernel,
    duplicate,
    duplicate_partial,
    extended_gram,
    extended_kernel,
)
from .evaluation import (
    CVReport,
    EvalReport,
    GridCell,
    TuneResult,
    benchmark,
    cross_validate,
    default_grid,
    empirical_value,
    misclassification,
    tune,
    value_mse,
)
from .propensity import (
    PropensityModel,
    empirical_propensity,
    fit_proportional_odds,
    uniform_propensity,
)
from .simulation import (
    SCENARIO_IDS,
    LabeledDataset,
    ScenarioConfig,
    derive_seed,
    generate,
    true_optimal,
)
from .solver import (
    DualSolution,
    SolverConfig,
    decision_values,
    duality_gap,
    fit,
    predict,
    recover_intercepts,
    solve_dual,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineRule",
    "CVReport",
    "Dataset",
    "DualSolution",
    "DuplicatedData",
    "EvalReport",
    "FittedRule",
    "GridCell",
    "KernelSpec",
    "LabeledDataset",
    "PropensityModel",
    "SCENARIO_IDS",
    "ScenarioConfig",
    "SolverConfig",
    "TuneResult",
    "base_kernel",
    "benchmark",
    "cross_validate",
    "decision_values",
    "default_grid",
    "derive_seed",
    "duality_gap",
    "duplicate",
    "duplicate_partial",
    "empirical_propensity",
    "empirical_value",
    "extended_gram",
    "extended_kernel",
    "fit",
    "fit_owl",
    "fit_pls_l1",
    "fit_proportional_odds",
    "generate",
    "misclassification",
    "modified_hinge",
    "predict",
    "recover_intercepts",
    "sign",
    "solve_dual",
    "true_optimal",
    "tune",
    "uniform_propensity",
    "value_mse",
]
