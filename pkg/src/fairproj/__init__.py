"""Post-hoc projection of multi-class classifiers onto group-fairness constraints."""

from .baseline import (
    GroupPredictor,
    LinearModel,
    fit_group_model,
    fit_logreg,
    load_model,
    predict_proba,
    save_model,
)
from .constraints import (
    ConstraintSet,
    GroupModel,
    build_constraints,
    build_eo,
    build_oae,
    build_sp,
    estimate_group_model,
    group_model_for,
)
from .data import SynthSpec, TabularDataset, biased_preset, generate_synth, load_csv, split
from .divergence import (
    EPS_CLIP,
    Divergence,
    ce_conj,
    clip_scores,
    f_divergence,
    kl_conj,
    softmax,
    v_update_ce,
    v_update_generic,
    v_update_kl,
)
from .exceptions import (
    ConvergenceError,
    CsvParseError,
    CsvSchemaError,
    DegenerateMarginalError,
    InfeasibilityError,
    InvalidModelError,
    NumericBlowupError,
    UndefinedRateError,
)
from .metrics import EvaluationReport, criterion_value, decide, evaluate
from .projection import (
    ProjectedModel,
    fit_projection,
    load_projected_model,
    project_scores,
    save_projected_model,
    tilt_ce,
    tilt_kl,
)
from .solver import (
    DualSolution,
    SolverConfig,
    admm_fit,
    default_max_iters,
    default_zeta,
    dual_objective,
    lambda_max_bound,
    lambda_qp_solve,
    precompute_q,
)

__version__ = "0.1.0"
