"""smallforms: a laboratory for integer linear forms that are simultaneously
small near the origin.

The package searches for integer witnesses q making |qX|_inf tiny, decides
the convergence criteria that govern the measure and dimension of the set of
well-approximable matrices, and runs desk-scale Monte Carlo / box-counting
experiments against those predictions.
"""

from .errors import (
    BudgetExceededError,
    HorizonTooSmallError,
    PreconditionError,
    SingularMatrixError,
    SmallFormsError,
    TheoremViolationError,
)
from .forms import (
    DISTANCE_CONVENTION,
    KRegularityReport,
    MatrixPoint,
    UbiquityConfig,
    Witness,
    form_value,
    in_delta_neighborhood,
    is_k_regular,
    resonant_distance,
)
from .functions import ApproximatingFunction, DimensionFunction, OmegaFunction, StepOmega
from .manifold import (
    EmbeddingInput,
    GammaPoint,
    certify_A_membership,
    constant_absorption_check,
    eta_embed,
    gamma_dichotomy,
    minor_defect,
)
from .measure import (
    ExperimentReport,
    estimate_E_t,
    estimate_delta_t,
    tail_dichotomy,
    ubiquity_density,
)
from .boxdim import GridSpec, boxdim_estimate, cover_count, truncated_box_count
from .search import (
    SearchBudget,
    WitnessSearchResult,
    dirichlet_bound,
    dirichlet_witness,
    height_obstruction,
    min_form,
    witnesses,
)
from .series import (
    SeriesBehavior,
    Verdict,
    build_omega,
    classify_series,
    dimension_formula,
    sum_equivalence_check,
    verdict,
)

__version__ = "0.1.0"

__all__ = [
    "ApproximatingFunction",
    "BudgetExceededError",
    "DISTANCE_CONVENTION",
    "DimensionFunction",
    "EmbeddingInput",
    "ExperimentReport",
    "GammaPoint",
    "GridSpec",
    "HorizonTooSmallError",
    "KRegularityReport",
    "MatrixPoint",
    "OmegaFunction",
    "PreconditionError",
    "SearchBudget",
    "SeriesBehavior",
    "SingularMatrixError",
    "SmallFormsError",
    "StepOmega",
    "TheoremViolationError",
    "UbiquityConfig",
    "Verdict",
    "Witness",
    "WitnessSearchResult",
    "boxdim_estimate",
    "build_omega",
    "certify_A_membership",
    "classify_series",
    "constant_absorption_check",
    "cover_count",
    "dimension_formula",
    "dirichlet_bound",
    "dirichlet_witness",
    "estimate_E_t",
    "estimate_delta_t",
    "eta_embed",
    "form_value",
    "gamma_dichotomy",
    "height_obstruction",
    "in_delta_neighborhood",
    "is_k_regular",
    "min_form",
    "minor_defect",
    "resonant_distance",
    "sum_equivalence_check",
    "tail_dichotomy",
    "truncated_box_count",
    "ubiquity_density",
    "verdict",
    "witnesses",
]
