"""Monte Carlo studies: coverage, width, error-of-error and selection accuracy."""

from __future__ import annotations

import enum
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Tuple

import numpy as np

from .benchmark import (
    OracleTruth,
    ScenarioConfig,
    gen_scenario,
    make_similar_pair,
    make_t_learner,
    sample_dataset,
    true_errors,
)
from .core import (
    ConfigurationError,
    Decision,
    DomainError,
    ErrorEstimate,
    make_folds,
    make_rng,
    mean_and_ci,
)
from .estimators import (
    LinkFunction,
    compare_absolute,
    compare_relative,
    dina_absolute_error,
    dina_relative_error,
    eif_absolute_error,
    eif_relative_error,
    plugin_absolute_error,
)
from .learners import (
    LOGISTIC,
    UNDERFIT_BOOSTING,
    Family,
    LearnerSpec,
    cross_fit,
    fit_lasso,
    predict_true_nuisance,
)

log = logging.getLogger(__name__)

THREADS_ENV = "CATE_JUDGE_THREADS"


class NuisanceOption(str, enum.Enum):
    TRUE = "TrueNuisance"
    LINEAR = "WellSpecifiedLinear"
    UNDERFIT = "UnderfitBoosting"


class Method(str, enum.Enum):
    PLUGIN_ABS = "PlugInAbs"
    EIF_ABS = "EifAbs"
    EIF_REL = "EifRel"
    DINA_ABS = "DinaAbs"
    DINA_REL = "DinaRel"

    @property
    def is_relative(self) -> bool:
        return self in (Method.EIF_REL, Method.DINA_REL)


ABS_TARGETS = ("abs_lasso", "abs_boost")
REL_TARGET = "rel"
DEFAULT_METHODS = (Method.PLUGIN_ABS, Method.EIF_ABS, Method.EIF_REL)


@dataclass(frozen=True)
class StudyConfig:
    scenario: str = "A"
    n_dgp_draws: int = 20
    n_reps: int = 50
    nuisance_option: NuisanceOption = NuisanceOption.TRUE
    methods: Tuple[Method, ...] = DEFAULT_METHODS
    alpha: float = 0.10
    n_train: int = 700
    n_test: int = 500
    n_oracle: int = 100_000
    d: int = 20
    active_fraction: float = 0.15
    noise_sd: float = 1.0
    folds: int = 2
    link: str = "identity"
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nuisance_option", NuisanceOption(self.nuisance_option))
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        if self.n_dgp_draws < 1 or self.n_reps < 1:
            raise ConfigurationError("n_dgp_draws and n_reps must be at least 1")
        if not 0 < self.alpha < 1:
            raise ConfigurationError(f"alpha={self.alpha} must lie in (0, 1)")
        if not self.methods:
            raise ConfigurationError("at least one method is required")
        # validates scenario, d, sizes
        self.scenario_config(0)

    def scenario_config(self, seed: int) -> ScenarioConfig:
        return ScenarioConfig(self.scenario, self.d, self.active_fraction, self.noise_sd,
                              self.n_train, self.n_test, seed)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["nuisance_option"] = self.nuisance_option.value
        out["methods"] = [m.value for m in self.methods]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown study fields: {sorted(unknown)}")
        d = dict(d)
        if "methods" in d:
            d["methods"] = tuple(d["methods"])
        return cls(**d)


@dataclass
class MetricsRow:
    method: str
    target: str
    n_completed: int = 0
    n_failed: int = 0
    coverage: float = float("nan")
    mean_width: float = float("nan")
    mean_abs_error_of_estimate: float = float("nan")
    mean_estimate: float = float("nan")
    n_negative: int = 0
    n_decidable: int = 0
    n_ties: int = 0
    selection_accuracy: float = float("nan")
    wrong_rate: float = float("nan")
    inconclusive_rate: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsRow":
        # JSON carries missing rates as null
        return cls(**{k: float("nan") if v is None else v for k, v in d.items()})


@dataclass
class MetricsTable:
    """One row per ``(method, target)``.

    Absolute-error methods make one selection per replication from the pair of
    intervals; that selection is reported on both of their rows.
    """

    rows: List[MetricsRow] = field(default_factory=list)
    config: Optional[dict] = None

    def row(self, method, target: str) -> MetricsRow:
        method = Method(method).value
        for r in self.rows:
            if r.method == method and r.target == target:
                return r
        raise KeyError((method, target))

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": [r.to_dict() for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsTable":
        return cls([MetricsRow.from_dict(r) for r in d["rows"]], d.get("config"))


def _targets(method: Method):
    return (REL_TARGET,) if method.is_relative else ABS_TARGETS


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _derived_seed(base_seed: int, tag: str, *index: int) -> int:
    return int(make_rng(base_seed, tag, *index).integers(0, 2 ** 63 - 1))


def _nuisance(option: NuisanceOption, dgp, test, folds: int, seed: int):
    if option is NuisanceOption.TRUE:
        return predict_true_nuisance(dgp, test)
    outcome = LearnerSpec(Family.OLS) if option is NuisanceOption.LINEAR else UNDERFIT_BOOSTING
    fa = make_folds(test.n, folds, seed)
    return cross_fit(test, fa, outcome, LOGISTIC, seed=seed)


def _evaluate(method: Method, preds, test, nf, alpha, link):
    """Returns ``{target: (estimate, psi)}`` for one method."""
    lasso, boost = preds
    if method is Method.EIF_REL:
        return {REL_TARGET: eif_relative_error(lasso, boost, test, nf, alpha)}
    if method is Method.DINA_REL:
        return {REL_TARGET: dina_relative_error(lasso, boost, test, nf, link, alpha)}
    if method is Method.EIF_ABS:
        fn = eif_absolute_error
    elif method is Method.PLUGIN_ABS:
        fn = plugin_absolute_error
    else:
        return {t: dina_absolute_error(p, test, nf, link, alpha) for t, p in zip(ABS_TARGETS, preds)}
    return {t: fn(p, test, nf, alpha) for t, p in zip(ABS_TARGETS, preds)}


def _verdict(method: Method, results, alpha) -> Decision:
    if method.is_relative:
        return compare_relative(results[REL_TARGET][0]).decision
    # two (1 - alpha/2) intervals give a 1 - alpha guarantee, matching the relative rule
    a = mean_and_ci(results[ABS_TARGETS[0]][1], alpha / 2)
    b = mean_and_ci(results[ABS_TARGETS[1]][1], alpha / 2)
    return compare_absolute(a, b).decision


def _oracle_value(target: str, oracle: OracleTruth) -> float:
    return {"abs_lasso": oracle.phi1, "abs_boost": oracle.phi2, "rel": oracle.delta}[target]


@dataclass
class DrawResult:
    draw: int
    oracle: OracleTruth
    # per rep: None on failure, else {method: ({target: estimate}, decision)}
    reps: List[Optional[dict]]


def run_draw(config: StudyConfig, draw: int) -> DrawResult:
    """One DGP realization: fit both T-learners, compute the oracle, run all reps."""
    scen = config.scenario_config(_derived_seed(config.base_seed, "dgp", draw))
    dgp = gen_scenario(scen)
    train, _ = sample_dataset(dgp, config.n_train, config.noise_sd,
                              _derived_seed(config.base_seed, "train", draw))
    learner_seed = _derived_seed(config.base_seed, "learner", draw)
    lasso = make_t_learner(train, Family.LASSO, learner_seed)
    boost = make_t_learner(train, Family.BOOSTING, learner_seed)
    oracle = true_errors(dgp, lasso, boost, config.n_oracle,
                         _derived_seed(config.base_seed, "oracle", draw))
    link = LinkFunction(config.link)
    reps: List[Optional[dict]] = []
    for rep in range(config.n_reps):
        seed = _derived_seed(config.base_seed, "test", draw, rep)
        try:
            test, _ = sample_dataset(dgp, config.n_test, config.noise_sd, seed)
            preds = (lasso.predictions(test, "lasso"), boost.predictions(test, "boost"))
            nf = _nuisance(config.nuisance_option, dgp, test, config.folds, seed)
            record = {}
            for method in config.methods:
                results = _evaluate(method, preds, test, nf, config.alpha, link)
                estimates = {t: r[0] for t, r in results.items()}
                record[method] = (estimates, _verdict(method, results, config.alpha))
            reps.append(record)
        except (ConfigurationError, DomainError, np.linalg.LinAlgError, FloatingPointError) as exc:
            log.warning("draw %d rep %d failed: %s", draw, rep, exc)
            reps.append(None)
    return DrawResult(draw, oracle, reps)


def _run_draw_star(args):
    return run_draw(*args)


def aggregate(config: StudyConfig, draws: List[DrawResult]) -> MetricsTable:
    rows = []
    for method in config.methods:
        for target in _targets(method):
            covered, widths, errs, points = [], [], [], []
            failed = 0
            correct = wrong = inconclusive = ties = 0
            for dr in draws:
                truth = _oracle_value(target, dr.oracle)
                better = Decision.SELECT_FIRST if dr.oracle.delta < 0 else Decision.SELECT_SECOND
                for rec in dr.reps:
                    if rec is None:
                        failed += 1
                        continue
                    estimates, decision = rec[method]
                    est: ErrorEstimate = estimates[target]
                    covered.append(est.covers(truth))
                    widths.append(est.width)
                    errs.append(abs(est.point - truth))
                    points.append(est.point)
                    if dr.oracle.is_tie():
                        ties += 1
                    elif decision is Decision.INCONCLUSIVE:
                        inconclusive += 1
                    elif decision is better:
                        correct += 1
                    else:
                        wrong += 1
            row = MetricsRow(method.value, target, n_completed=len(covered), n_failed=failed,
                             n_ties=ties)
            if covered:
                row.coverage = float(np.mean(covered))
                row.mean_width = float(np.mean(widths))
                row.mean_abs_error_of_estimate = float(np.mean(errs))
                row.mean_estimate = float(np.mean(points))
                row.n_negative = int(np.sum(np.asarray(points) < 0))
            decidable = correct + wrong + inconclusive
            row.n_decidable = decidable
            if decidable:
                row.selection_accuracy = correct / decidable
                row.wrong_rate = wrong / decidable
                row.inconclusive_rate = inconclusive / decidable
            rows.append(row)
    return MetricsTable(rows, config.to_dict())


def run_study(config: StudyConfig, workers: Optional[int] = None) -> MetricsTable:
    """Run every DGP draw (possibly in parallel) and aggregate in draw order."""
    draws = run_draws(config, workers)
    return aggregate(config, draws)


def run_draws(config: StudyConfig, workers: Optional[int] = None) -> List[DrawResult]:
    workers = default_workers() if workers is None else workers
    workers = max(1, min(workers, config.n_dgp_draws))
    tasks = [(config, i) for i in range(config.n_dgp_draws)]
    if workers == 1:
        return [run_draw(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves task order, so aggregation sees draws in index order
        return list(pool.map(_run_draw_star, tasks))


# ---------------------------------------------------------------------------
# Single-dataset demonstrations


@dataclass
class DemoResult:
    estimates: Dict[str, ErrorEstimate]
    oracle: Dict[str, float]
    verdicts: Dict[str, str] = field(default_factory=dict)
    extra: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "estimates": {k: v.to_dict() for k, v in self.estimates.items()},
            "oracle": dict(self.oracle),
            "verdicts": dict(self.verdicts),
            "extra": dict(self.extra),
        }


def run_fig1_demo(seed: int, scenario: str = "A", n_train: int = 700, n_test: int = 500,
                  alpha: float = 0.10, n_oracle: int = 100_000) -> DemoResult:
    """Lasso vs boosting T-learners judged with deliberately underfit nuisances."""
    scen = ScenarioConfig(scenario, n_train=n_train, n_test=n_test, seed=_derived_seed(seed, "fig1-dgp"))
    dgp = gen_scenario(scen)
    train, _ = sample_dataset(dgp, n_train, scen.noise_sd, _derived_seed(seed, "fig1-train"))
    test, _ = sample_dataset(dgp, n_test, scen.noise_sd, _derived_seed(seed, "fig1-test"))
    lasso = make_t_learner(train, Family.LASSO, seed)
    boost = make_t_learner(train, Family.BOOSTING, seed)
    oracle = true_errors(dgp, lasso, boost, n_oracle, _derived_seed(seed, "fig1-oracle"))
    nf = _nuisance(NuisanceOption.UNDERFIT, dgp, test, 2, _derived_seed(seed, "fig1-folds"))
    p1, p2 = lasso.predictions(test, "lasso"), boost.predictions(test, "boost")
    est = {
        "plugin_abs_lasso": plugin_absolute_error(p1, test, nf, alpha)[0],
        "plugin_abs_boost": plugin_absolute_error(p2, test, nf, alpha)[0],
        "eif_abs_lasso": eif_absolute_error(p1, test, nf, alpha)[0],
        "eif_abs_boost": eif_absolute_error(p2, test, nf, alpha)[0],
        "eif_rel": eif_relative_error(p1, p2, test, nf, alpha)[0],
    }
    # the plug-in pair implies the same relative point; its interval is the EIF one
    plug_point = est["plugin_abs_lasso"].point - est["plugin_abs_boost"].point
    est["plugin_rel"] = ErrorEstimate(
        plug_point, est["eif_rel"].var_hat, est["eif_rel"].se,
        plug_point - est["eif_rel"].width / 2, plug_point + est["eif_rel"].width / 2,
        alpha, test.n,
    )
    truth = {
        "plugin_abs_lasso": oracle.phi1, "plugin_abs_boost": oracle.phi2,
        "eif_abs_lasso": oracle.phi1, "eif_abs_boost": oracle.phi2,
        "eif_rel": oracle.delta, "plugin_rel": oracle.delta,
    }
    verdicts = {
        "eif_rel": compare_relative(est["eif_rel"]).decision.value,
        "eif_abs": compare_absolute(est["eif_abs_lasso"], est["eif_abs_boost"]).decision.value,
    }
    return DemoResult(est, truth, verdicts, {"oracle_mc_se": oracle.mc_se})


FIG2_PENALTY_RATIO = 1.25
FIG2_PENALTY_ANCHOR = 4.0


def run_fig2_demo(seed: int, scenario: str = "A", n_train: int = 700, n_test: int = 500,
                  alpha: float = 0.10, n_oracle: int = 100_000,
                  penalty_ratio: float = FIG2_PENALTY_RATIO,
                  penalty_anchor: float = FIG2_PENALTY_ANCHOR) -> DemoResult:
    """Two lasso T-learners that differ only in the penalty, judged with true nuisances.

    The second learner uses ``penalty_anchor`` times the cross-validated penalty
    of the treated arm and the first a penalty ``penalty_ratio`` times larger.
    Anchoring above the CV optimum puts both learners on the slope of the error
    curve, where a small penalty gap gives an error gap of the same order.
    """
    scen = ScenarioConfig(scenario, n_train=n_train, n_test=n_test, seed=_derived_seed(seed, "fig2-dgp"))
    dgp = gen_scenario(scen)
    train, _ = sample_dataset(dgp, n_train, scen.noise_sd, _derived_seed(seed, "fig2-train"))
    test, _ = sample_dataset(dgp, n_test, scen.noise_sd, _derived_seed(seed, "fig2-test"))
    trt = train.treatment == 1
    lam_cv = fit_lasso(train.covariates[trt], train.outcome[trt], "cv", seed=seed).lam
    lam_ref = lam_cv * penalty_anchor
    t1, t2 = make_similar_pair(train, lam_ref * penalty_ratio, lam_ref)
    oracle = true_errors(dgp, t1, t2, n_oracle, _derived_seed(seed, "fig2-oracle"))
    nf = predict_true_nuisance(dgp, test)
    p1, p2 = t1.predictions(test), t2.predictions(test)
    est = {
        "eif_abs_1": eif_absolute_error(p1, test, nf, alpha)[0],
        "eif_abs_2": eif_absolute_error(p2, test, nf, alpha)[0],
        "eif_rel": eif_relative_error(p1, p2, test, nf, alpha)[0],
    }
    truth = {"eif_abs_1": oracle.phi1, "eif_abs_2": oracle.phi2, "eif_rel": oracle.delta}
    verdicts = {
        "absolute": compare_absolute(est["eif_abs_1"], est["eif_abs_2"]).decision.value,
        "relative": compare_relative(est["eif_rel"]).decision.value,
    }
    extra = {"lambda1": lam_ref * penalty_ratio, "lambda2": lam_ref, "lambda_cv": lam_cv,
             "oracle_mc_se": oracle.mc_se}
    return DemoResult(est, truth, verdicts, extra)
