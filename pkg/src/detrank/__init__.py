"""Exact tools for partition rank, slice rank and analytic rank of multilinear forms."""

from .decomp import (
    Decomposition,
    LinearReduction,
    ReductionError,
    SymmetricReduction,
    SyzygyReduction,
    Term,
    apply_reduction,
    det4_quadratic,
    expand,
    laplace,
    make_term,
    structurally_equal,
    two_row_laplace,
    verify,
)
from .experiments import EnsembleParams, ExperimentReport, run_bias_experiment, sample_decomposable, separation_report
from .field import INTEGERS, FieldError, FieldSpec, make_field, parse_field
from .linalg import Matrix, complete_to_sl, det, in_span, kernel_basis, rank, rank_deficient_probability
from .multilinear import (
    MultilinearForm,
    ShapeError,
    check_4to2_identity,
    det_form,
    evaluate,
    gradient_form,
    levi_civita,
    restrict,
)
from .rank import (
    BiasReport,
    BudgetExceeded,
    ark_det_closed_form,
    bias_exact,
    bias_monte_carlo,
    bias_via_gradient,
    uniformity_of_random_form,
)
from .reduction_demos import check_minor_independence, run_script
from .search import (
    SearchCertificate,
    exhaustive_prk_at_most,
    prk_lower_bound_value,
    restriction_step,
    restriction_step_general,
    zeroing_vectors,
)

__version__ = "0.1.0"

__all__ = [
    "BiasReport",
    "BudgetExceeded",
    "Decomposition",
    "EnsembleParams",
    "ExperimentReport",
    "FieldError",
    "FieldSpec",
    "INTEGERS",
    "LinearReduction",
    "Matrix",
    "MultilinearForm",
    "ReductionError",
    "SearchCertificate",
    "ShapeError",
    "SymmetricReduction",
    "SyzygyReduction",
    "Term",
    "apply_reduction",
    "ark_det_closed_form",
    "bias_exact",
    "bias_monte_carlo",
    "bias_via_gradient",
    "check_4to2_identity",
    "check_minor_independence",
    "complete_to_sl",
    "det",
    "det4_quadratic",
    "det_form",
    "evaluate",
    "exhaustive_prk_at_most",
    "expand",
    "gradient_form",
    "in_span",
    "kernel_basis",
    "laplace",
    "levi_civita",
    "make_field",
    "make_term",
    "parse_field",
    "prk_lower_bound_value",
    "rank",
    "rank_deficient_probability",
    "restrict",
    "restriction_step",
    "restriction_step_general",
    "run_bias_experiment",
    "run_script",
    "sample_decomposable",
    "separation_report",
    "structurally_equal",
    "two_row_laplace",
    "uniformity_of_random_form",
    "verify",
    "zeroing_vectors",
]
