"""Treatment-effect estimation with propensity-aware neural outcome models.

Three architectures (dragonnet, tarnet, nednet) share a small numpy
training stack; a fluctuation parameter can target the training loss at
the average-effect functional; downstream estimators (plug-in, A-IPTW,
TMLE and the trained-fluctuation plug-in) run over trimmed propensity
scores.  `bench` replicates experiments over seeds and compares methods.
"""

from .bench import (
    DEFAULT_GRID,
    DEFAULT_TRUNCATION_LEVELS,
    ExperimentConfig,
    ExperimentResult,
    GridResult,
    ImprovementStats,
    RunResult,
    SummaryRow,
    SummaryTable,
    compare_methods,
    emit_report,
    emit_sweep_report,
    format_summary,
    format_truncation_table,
    load_report,
    make_dataset,
    paired_headline_errors,
    run_experiment,
    run_grid,
    run_replication,
    stratified_comparison,
    subsample_sweep,
    summarize,
    truncation_sweep,
)
from .datagen import (
    Dataset,
    SplitIndices,
    SplitSpec,
    gen_dgp_ihdp_like,
    gen_dgp_irrelevant,
    gen_dgp_lin,
    load_csv,
    split,
    write_csv,
)
from .errors import (
    ConfigError,
    EstimationError,
    IngestionError,
    NumericDomainError,
    NumericError,
    ShapeError,
    TrainingDivergedError,
    UsageError,
)
from .estimators import (
    ESTIMATOR_TAGS,
    TAG_AIPTW,
    TAG_Q,
    TAG_TMLE,
    TAG_TREG,
    Estimate,
    EstimateReport,
    InfluenceValues,
    TrimResult,
    apply_estimators,
    clever_covariate,
    diff_in_means,
    influence_curve,
    overlap_flag,
    propensity_accuracy,
    psi_aiptw,
    psi_q,
    psi_tmle,
    psi_treg,
    trim,
)
from .models import (
    ARCHITECTURES,
    FittedModel,
    Scaler,
    load_checkpoint,
    save_checkpoint,
)
from .objectives import (
    LossBreakdown,
    base_objective,
    cross_entropy_term,
    full_objective,
    h_values,
    perturbed_outcome,
    select_observed,
    squared_error_term,
    stationary_epsilon,
    treg_term,
)
from .train import TrainConfig, train_architecture, train_dragonnet, train_nednet, train_tarnet

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "DEFAULT_GRID",
    "DEFAULT_TRUNCATION_LEVELS",
    "ESTIMATOR_TAGS",
    "TAG_AIPTW",
    "TAG_Q",
    "TAG_TMLE",
    "TAG_TREG",
    "ConfigError",
    "Dataset",
    "Estimate",
    "EstimateReport",
    "EstimationError",
    "ExperimentConfig",
    "ExperimentResult",
    "FittedModel",
    "GridResult",
    "ImprovementStats",
    "InfluenceValues",
    "IngestionError",
    "LossBreakdown",
    "NumericDomainError",
    "NumericError",
    "RunResult",
    "Scaler",
    "ShapeError",
    "SplitIndices",
    "SplitSpec",
    "SummaryRow",
    "SummaryTable",
    "TrainConfig",
    "TrainingDivergedError",
    "TrimResult",
    "UsageError",
    "apply_estimators",
    "base_objective",
    "clever_covariate",
    "compare_methods",
    "cross_entropy_term",
    "diff_in_means",
    "emit_report",
    "emit_sweep_report",
    "format_summary",
    "format_truncation_table",
    "full_objective",
    "gen_dgp_ihdp_like",
    "gen_dgp_irrelevant",
    "gen_dgp_lin",
    "h_values",
    "influence_curve",
    "load_checkpoint",
    "load_csv",
    "load_report",
    "make_dataset",
    "overlap_flag",
    "paired_headline_errors",
    "perturbed_outcome",
    "propensity_accuracy",
    "psi_aiptw",
    "psi_q",
    "psi_tmle",
    "psi_treg",
    "run_experiment",
    "run_grid",
    "run_replication",
    "save_checkpoint",
    "select_observed",
    "split",
    "squared_error_term",
    "stationary_epsilon",
    "stratified_comparison",
    "subsample_sweep",
    "summarize",
    "train_architecture",
    "train_dragonnet",
    "train_nednet",
    "train_tarnet",
    "treg_term",
    "trim",
    "write_csv",
]
