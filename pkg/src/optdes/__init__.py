"""optdes: D-optimal experimental design for GLMs and random-intercept GLMMs.

The library builds, verifies and compares designs for generalized linear
models (binomial, Poisson, gamma, normal) and for blocked experiments with
a random intercept.  Designs can come from the numerical optimizers, from
the analytic constructors, or from files; every design can be certified
with an equivalence scan and compared by D-efficiency.
"""

from .errors import (
    DimensionError,
    LinkDomainError,
    NumericalError,
    OptdesError,
    PreconditionError,
    SingularDesignError,
    UnsupportedModelError,
    ValidationError,
)
from .families import (
    ETA_DOMAIN_FLOOR,
    FAMILY_KINDS,
    LINK_KINDS,
    DesignRegion,
    Family,
    LinkFunction,
    ModelBasis,
    ModelSpec,
    assert_eta_admissible,
    eta_admissible_mask,
    eval_basis,
    eval_basis_many,
    glm_weight,
    induced_point,
    inverse_link,
    linear_predictor,
    link_value,
    mean_derivative,
    weight_from_eta,
    weights_at,
)
from .designs import (
    ContinuousDesign,
    EquivalenceReport,
    ExactDesign,
    GridSpec,
    d_efficiency,
    d_objective,
    default_tol,
    design_objective,
    equivalence_scan,
    from_runs,
    information_matrix,
    informative_window,
    merge_close_points,
    prune_design,
    psd_logdet,
    sensitivity,
    sensitivity_profile,
    set_thread_count,
    support_bound,
)
from .serialize import (
    block_design_to_csv,
    canonical_json,
    design_from_csv,
    design_from_json,
    design_from_jsonable,
    design_to_csv,
    design_to_json,
    design_to_jsonable,
    draws_to_csv,
    ecdf_to_csv,
    fingerprint,
    fmt_float,
    model_fingerprint,
    model_from_jsonable,
    model_to_jsonable,
    region_from_jsonable,
    region_to_jsonable,
    sensitivity_to_csv,
)
from .priors import (
    STREAM_ANNEAL,
    STREAM_EXCHANGE,
    STREAM_LOWDISC,
    STREAM_PRIOR,
    STREAM_STARTS,
    EfficiencyDistribution,
    ParamSample,
    Prior,
    SampleSpec,
    bayes_objective,
    bayes_sensitivity,
    efficiency_distribution,
    equivalence_check,
    nearest_rank_quantile,
    resolve_sample,
    rng_for,
    sample_prior,
)
from .optimize import (
    ContinuousOptOptions,
    ExactOptOptions,
    ExactOptResult,
    OptimizeResult,
    WynnFedorovResult,
    optimize_continuous,
    optimize_exact,
    refine_weights,
    wynn_fedorov,
)
from .closed_form import (
    CanonicalConstant,
    GammaConditionReport,
    TheoremDesign,
    bayes_minimal_poisson_design,
    canonical_logistic_constant,
    gamma_ofaat_design,
    logistic_1d_design,
    logistic_peak_eta,
    russell_poisson_design,
    yang_zhang_design,
)
from .glmm import (
    BLOCK_METHODS,
    BlockDesign,
    BlockOptResult,
    RandomInterceptModel,
    block_design_info,
    block_equivalence_check,
    block_info_matrix,
    block_objective,
    direct_binary_block_info,
    mv_sensitivity,
    optimize_block_design,
)
from .tables import TableResult, reproduce_table, table_ids

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "OptdesError",
    "ValidationError",
    "DimensionError",
    "UnsupportedModelError",
    "LinkDomainError",
    "SingularDesignError",
    "NumericalError",
    "PreconditionError",
    # model definition
    "FAMILY_KINDS",
    "LINK_KINDS",
    "ETA_DOMAIN_FLOOR",
    "Family",
    "LinkFunction",
    "ModelBasis",
    "DesignRegion",
    "ModelSpec",
    "eval_basis",
    "eval_basis_many",
    "linear_predictor",
    "eta_admissible_mask",
    "assert_eta_admissible",
    "inverse_link",
    "link_value",
    "mean_derivative",
    "weight_from_eta",
    "glm_weight",
    "weights_at",
    "induced_point",
    # designs and criteria
    "ContinuousDesign",
    "ExactDesign",
    "from_runs",
    "information_matrix",
    "psd_logdet",
    "d_objective",
    "design_objective",
    "d_efficiency",
    "sensitivity",
    "sensitivity_profile",
    "GridSpec",
    "EquivalenceReport",
    "default_tol",
    "informative_window",
    "equivalence_scan",
    "merge_close_points",
    "prune_design",
    "support_bound",
    "set_thread_count",
    # serialization
    "fmt_float",
    "canonical_json",
    "fingerprint",
    "design_to_csv",
    "design_from_csv",
    "sensitivity_to_csv",
    "ecdf_to_csv",
    "draws_to_csv",
    "block_design_to_csv",
    "region_to_jsonable",
    "region_from_jsonable",
    "model_to_jsonable",
    "model_from_jsonable",
    "model_fingerprint",
    "design_to_jsonable",
    "design_from_jsonable",
    "design_to_json",
    "design_from_json",
    # priors and Bayesian criteria
    "rng_for",
    "STREAM_PRIOR",
    "STREAM_STARTS",
    "STREAM_ANNEAL",
    "STREAM_LOWDISC",
    "STREAM_EXCHANGE",
    "Prior",
    "SampleSpec",
    "ParamSample",
    "sample_prior",
    "resolve_sample",
    "bayes_objective",
    "bayes_sensitivity",
    "equivalence_check",
    "nearest_rank_quantile",
    "EfficiencyDistribution",
    "efficiency_distribution",
    # optimizers
    "refine_weights",
    "WynnFedorovResult",
    "wynn_fedorov",
    "ContinuousOptOptions",
    "OptimizeResult",
    "optimize_continuous",
    "ExactOptOptions",
    "ExactOptResult",
    "optimize_exact",
    # closed forms
    "CanonicalConstant",
    "TheoremDesign",
    "GammaConditionReport",
    "canonical_logistic_constant",
    "logistic_peak_eta",
    "logistic_1d_design",
    "yang_zhang_design",
    "gamma_ofaat_design",
    "russell_poisson_design",
    "bayes_minimal_poisson_design",
    # blocked experiments
    "BLOCK_METHODS",
    "RandomInterceptModel",
    "BlockDesign",
    "block_info_matrix",
    "block_design_info",
    "block_objective",
    "mv_sensitivity",
    "block_equivalence_check",
    "BlockOptResult",
    "optimize_block_design",
    "direct_binary_block_info",
    # reference-table registry
    "TableResult",
    "reproduce_table",
    "table_ids",
]
