"""Generalized Elastic Net (gEN) for correlated designs.

Solvers for the Lasso, the Elastic Net and the generalized Elastic Net,
the IC / EIC / GIC sign-consistency criteria, and a reproducible simulation
harness comparing gEN with the Elastic Net.
"""

from genen.linalg import (
    EigenDecomposition,
    LinalgError,
    NearSingularError,
    eigen_sym,
    lambda_max,
    mat_power_half,
    solve_sym,
    sym_matrix,
)
from genen.simulate import (
    CovarianceSpec,
    Dataset,
    TruthSpec,
    build_covariance,
    sample_dataset,
    whiten_design,
)
from genen.solvers import (
    GenEnFit,
    KktReport,
    PenaltyConfig,
    fit_elastic_net,
    fit_gen_elastic_net,
    fit_lasso,
    kkt_check,
    solve_path,
)
from genen.conditions import (
    ConditionReport,
    LemmaEventReport,
    PartitionedMoments,
    TheoremQuantities,
    condition_report,
    eic_value,
    gic_value,
    ic_value,
    lemma_events,
    partition_moments,
    theorem_quantities,
)
from genen.metrics import MetricsRecord, best_tpr_minus_fpr, selection_metrics

__version__ = "0.1.0"

__all__ = [
    "ConditionReport",
    "CovarianceSpec",
    "Dataset",
    "EigenDecomposition",
    "GenEnFit",
    "KktReport",
    "LemmaEventReport",
    "LinalgError",
    "MetricsRecord",
    "NearSingularError",
    "PartitionedMoments",
    "PenaltyConfig",
    "TheoremQuantities",
    "TruthSpec",
    "best_tpr_minus_fpr",
    "build_covariance",
    "condition_report",
    "eic_value",
    "eigen_sym",
    "fit_elastic_net",
    "fit_gen_elastic_net",
    "fit_lasso",
    "gic_value",
    "ic_value",
    "kkt_check",
    "lambda_max",
    "lemma_events",
    "mat_power_half",
    "partition_moments",
    "sample_dataset",
    "selection_metrics",
    "solve_path",
    "solve_sym",
    "sym_matrix",
    "theorem_quantities",
    "whiten_design",
]
