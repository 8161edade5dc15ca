"""Estimate and compare the accuracy of heterogeneous treatment effect estimators."""

from .benchmark import (
    DgpSpec,
    OracleTruth,
    ScenarioConfig,
    TLearner,
    gen_scenario,
    make_similar_pair,
    make_t_learner,
    sample_dataset,
    true_errors,
)
from .core import (
    Basis,
    ComparisonVerdict,
    ConfigurationError,
    Decision,
    DomainError,
    ErrorEstimate,
    FoldAssignment,
    FoldConfigurationError,
    HtePredictions,
    InfluenceValues,
    NuisanceFit,
    TestDataset,
    aipw_score,
    make_folds,
    mean_and_ci,
    normal_quantile,
)
from .estimators import (
    LinkFunction,
    LinkTag,
    compare_absolute,
    compare_relative,
    dina_absolute_error,
    dina_relative_error,
    eif_absolute_error,
    eif_relative_error,
    plugin_absolute_error,
)
from .harness import (
    Method,
    MetricsTable,
    NuisanceOption,
    StudyConfig,
    run_fig1_demo,
    run_fig2_demo,
    run_study,
)
from .learners import Family, LearnerSpec, cross_fit, fit_boosting, fit_lasso, fit_logistic, predict_true_nuisance

__all__ = [name for name in dir() if not name.startswith("_")]
