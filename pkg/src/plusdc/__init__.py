"""Plackett-Luce ranking models with dynamic covariates on comparison hypergraphs."""

from .design import (
    CareResult,
    CurlCheck,
    DesignMatrices,
    IdentifiabilityResult,
    Triangle,
    assemble,
    care_equivalence,
    consistency_diagnostics,
    curl_matrix,
    curl_sufficient_check,
    delta_x,
    identifiability_check,
    list_triangles,
)
from .errors import (
    CapabilityError,
    ConfigError,
    DomainError,
    InputError,
    NumericError,
    PlusDCError,
)
from .estimate import (
    ExistenceReport,
    FitConfig,
    FitResult,
    aic_bic,
    check_mle_existence,
    fit,
    information_criteria,
    minorizer_q,
    mm_update_u,
    newton_update_v,
)
from .experiments import (
    ConsistencyResult,
    ConsistencySpec,
    CvResult,
    CvSpec,
    model_selection,
    rbf_covariate,
    restrict_covariates,
    run_consistency,
    run_kfold_cv,
    simulate_covariates,
    simulate_outcomes,
)
from .hypergraph import (
    Breaking,
    Hypergraph,
    break_edges,
    cheeger_constant,
    weakly_admissible_diameter,
)
from .io import (
    file_digest,
    read_comparisons_csv,
    read_graph_csv,
    read_params_json,
    write_comparisons_csv,
    write_graph_csv,
    write_manifest,
    write_params_json,
)
from .model import (
    Comparison,
    Dataset,
    Params,
    gradient,
    hessian,
    log_likelihood,
    make_dataset,
    outcome_prob,
    ranking_log_prob,
    sample_outcome,
    score,
    top_k_prob,
)
from .randgraph import (
    HsbmSpec,
    NurhmSpec,
    derive_rng,
    hsbm2_edge_count,
    nurhm6_edge_count,
    sample_experiment_design,
    sample_hsbm,
    sample_nurhm,
)

__version__ = "0.1.0"

__all__ = [
    "Breaking",
    "CapabilityError",
    "CareResult",
    "Comparison",
    "ConfigError",
    "ConsistencyResult",
    "ConsistencySpec",
    "CurlCheck",
    "CvResult",
    "CvSpec",
    "Dataset",
    "DesignMatrices",
    "DomainError",
    "ExistenceReport",
    "FitConfig",
    "FitResult",
    "HsbmSpec",
    "Hypergraph",
    "IdentifiabilityResult",
    "InputError",
    "NumericError",
    "NurhmSpec",
    "Params",
    "PlusDCError",
    "Triangle",
    "aic_bic",
    "assemble",
    "break_edges",
    "care_equivalence",
    "check_mle_existence",
    "cheeger_constant",
    "consistency_diagnostics",
    "curl_matrix",
    "curl_sufficient_check",
    "delta_x",
    "derive_rng",
    "file_digest",
    "fit",
    "gradient",
    "hessian",
    "hsbm2_edge_count",
    "identifiability_check",
    "information_criteria",
    "list_triangles",
    "log_likelihood",
    "make_dataset",
    "minorizer_q",
    "mm_update_u",
    "model_selection",
    "newton_update_v",
    "nurhm6_edge_count",
    "outcome_prob",
    "ranking_log_prob",
    "rbf_covariate",
    "read_comparisons_csv",
    "read_graph_csv",
    "read_params_json",
    "restrict_covariates",
    "run_consistency",
    "run_kfold_cv",
    "sample_experiment_design",
    "sample_hsbm",
    "sample_nurhm",
    "sample_outcome",
    "score",
    "simulate_covariates",
    "simulate_outcomes",
    "top_k_prob",
    "weakly_admissible_diameter",
    "write_comparisons_csv",
    "write_graph_csv",
    "write_manifest",
    "write_params_json",
]
