"""Semi-synthetic scenarios (a)-(d), oracle errors and the two T-learners."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Callable, Optional, Tuple

import numpy as np

from .core import ConfigurationError, DomainError, HtePredictions, TestDataset, make_rng
from .learners import Family, LearnerSpec, fit_lasso

SCENARIOS = ("A", "B", "C", "D")
# scenario -> (nonlinear outcome means, nonlinear propensity)
NONLINEARITY = {"A": (False, False), "B": (True, False), "C": (False, True), "D": (True, True)}
E_LOW, E_HIGH = 0.05, 0.95


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "A"
    d: int = 20
    active_fraction: float = 0.15
    noise_sd: float = 1.0
    n_train: int = 700
    n_test: int = 500
    seed: int = 0
    mean_link: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "scenario", str(self.scenario).upper())
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}")
        if self.d < 5:
            raise ConfigurationError(f"d={self.d} must be at least 5")
        if not 0 < self.active_fraction <= 0.2:
            raise ConfigurationError("active_fraction must lie in (0, 0.2]")
        if self.noise_sd < 0:
            raise ConfigurationError("noise_sd must be non-negative")
        if self.n_train < 2 or self.n_test < 2:
            raise ConfigurationError("sample sizes must be at least 2")
        if self.mean_link not in ("identity", "log"):
            raise ConfigurationError(f"unknown mean_link {self.mean_link!r}")

    @property
    def n_active(self) -> int:
        return max(1, math.floor(self.active_fraction * self.d))


@dataclass(frozen=True)
class Score:
    """``c + b.x_S + q.x_S^2 + sum_{j<l} g_jl x_j x_l`` over an active set ``S``."""

    intercept: float
    linear: np.ndarray
    quadratic: np.ndarray
    interaction: np.ndarray

    def __call__(self, XS: np.ndarray) -> np.ndarray:
        out = self.intercept + XS @ self.linear
        if np.any(self.quadratic != 0):
            out = out + (XS ** 2) @ self.quadratic
        if np.any(self.interaction != 0):
            pairs = combinations(range(XS.shape[1]), 2)
            for g, (j, l) in zip(self.interaction, pairs):
                if g != 0:
                    out = out + g * XS[:, j] * XS[:, l]
        return out

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "linear": self.linear.tolist(),
            "quadratic": self.quadratic.tolist(),
            "interaction": self.interaction.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Score":
        return cls(float(d["intercept"]), np.asarray(d["linear"], float),
                   np.asarray(d["quadratic"], float), np.asarray(d["interaction"], float))


@dataclass(frozen=True)
class DgpSpec:
    """A data-generating process with known ``mu0``, ``mu1`` and ``e``.

    Covariates are independent standard normals. ``propensity_override``
    replaces ``e(x)`` by a constant (randomized design).
    """

    scenario: str
    d: int
    active: np.ndarray
    score0: Score
    score1: Score
    score_e: Score
    mean_link: str = "identity"
    propensity_override: Optional[float] = None

    def _xs(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.d:
            raise DomainError(f"expected {self.d} covariates, got {X.shape[1]}")
        return X[:, self.active]

    def _mean(self, s):
        return np.exp(s) if self.mean_link == "log" else s

    def mu0(self, X) -> np.ndarray:
        return self._mean(self.score0(self._xs(X)))

    def mu1(self, X) -> np.ndarray:
        return self._mean(self.score1(self._xs(X)))

    def tau(self, X) -> np.ndarray:
        """Effect on the natural-parameter scale (the mean difference for identity)."""
        XS = self._xs(X)
        return self.score1(XS) - self.score0(XS)

    def e(self, X) -> np.ndarray:
        XS = self._xs(X)
        if self.propensity_override is not None:
            return np.full(XS.shape[0], float(self.propensity_override))
        s = self.score_e(XS) / 2.0
        return np.clip(0.5 * (1.0 + np.tanh(0.5 * s)), E_LOW, E_HIGH)

    def sample_covariates(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((n, self.d))

    def with_propensity(self, value: Optional[float]) -> "DgpSpec":
        return replace(self, propensity_override=value)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "d": self.d,
            "active": self.active.tolist(),
            "score0": self.score0.to_dict(),
            "score1": self.score1.to_dict(),
            "score_e": self.score_e.to_dict(),
            "mean_link": self.mean_link,
            "propensity_override": self.propensity_override,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DgpSpec":
        return cls(
            scenario=d["scenario"], d=int(d["d"]), active=np.asarray(d["active"], dtype=np.int64),
            score0=Score.from_dict(d["score0"]), score1=Score.from_dict(d["score1"]),
            score_e=Score.from_dict(d["score_e"]), mean_link=d.get("mean_link", "identity"),
            propensity_override=d.get("propensity_override"),
        )


def _draw_score(rng, k, nonlinear, scale=1.0):
    n_pairs = k * (k - 1) // 2
    intercept = float(rng.uniform(-1, 1)) * scale
    linear = rng.uniform(-1, 1, k) * scale
    if nonlinear:
        quadratic = rng.uniform(-0.5, 0.5, k) * scale
        interaction = rng.uniform(-0.5, 0.5, n_pairs) * scale
    else:
        quadratic = np.zeros(k)
        interaction = np.zeros(n_pairs)
    return Score(intercept, linear, quadratic, interaction)


def gen_scenario(config: ScenarioConfig) -> DgpSpec:
    """Draw sparse outcome and propensity functions for one scenario."""
    rng = make_rng(config.seed, "scenario")
    k = config.n_active
    active = np.sort(rng.choice(config.d, size=k, replace=False))
    nl_mu, nl_e = NONLINEARITY[config.scenario]
    # keep log-link means in a moderate range
    scale = 0.5 if config.mean_link == "log" else 1.0
    score0 = _draw_score(rng, k, nl_mu, scale)
    score1 = _draw_score(rng, k, nl_mu, scale)
    score_e = _draw_score(rng, k, nl_e)
    return DgpSpec(config.scenario, config.d, active, score0, score1, score_e, config.mean_link)


def sample_dataset(dgp: DgpSpec, n: int, noise_sd: float, seed: int) -> Tuple[TestDataset, np.ndarray]:
    """Draw ``n`` units; returns the dataset and the oracle effect at each unit."""
    if n < 2:
        raise ConfigurationError("n must be at least 2")
    for attempt in range(1000):
        rng = make_rng(seed, "sample", n, attempt)
        X = dgp.sample_covariates(n, rng)
        w = (rng.random(n) < dgp.e(X)).astype(float)
        if 0 < w.sum() < n:
            break
    else:
        raise DomainError("could not draw both treatment arms")
    mean = np.where(w == 1, dgp.mu1(X), dgp.mu0(X))
    y = mean + noise_sd * rng.standard_normal(n) if noise_sd > 0 else mean
    return TestDataset(X, w, y), dgp.tau(X)


@dataclass(frozen=True)
class OracleTruth:
    phi1: float
    phi2: float
    delta: float
    mc_se: float
    n_oracle: int
    phi1_se: float = 0.0
    phi2_se: float = 0.0

    def is_tie(self) -> bool:
        return abs(self.delta) <= 3 * self.mc_se

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("phi1", "phi2", "delta", "mc_se", "n_oracle", "phi1_se", "phi2_se")}


def true_errors(dgp: DgpSpec, tau1_fn: Callable, tau2_fn: Callable,
                n_oracle: int = 100_000, seed: int = 0) -> OracleTruth:
    """Monte Carlo absolute errors of two effect functions over fresh covariates."""
    if n_oracle < 10_000:
        raise ConfigurationError("n_oracle must be at least 1e4")
    X = dgp.sample_covariates(n_oracle, make_rng(seed, "oracle", n_oracle))
    tau = dgp.tau(X)
    a1 = (tau1_fn(X) - tau) ** 2
    a2 = (tau2_fn(X) - tau) ** 2
    phi1, phi2 = float(a1.mean()), float(a2.mean())
    root = math.sqrt(n_oracle)
    return OracleTruth(
        phi1=phi1, phi2=phi2, delta=phi1 - phi2,
        mc_se=float((a1 - a2).std() / root), n_oracle=n_oracle,
        phi1_se=float(a1.std() / root), phi2_se=float(a2.std() / root),
    )


# ---------------------------------------------------------------------------
# T-learners

LASSO_HTE = LearnerSpec(Family.LASSO)
BOOSTING_HTE = LearnerSpec(Family.BOOSTING, max_depth=3, rounds=100, learning_rate=0.1)


@dataclass(frozen=True)
class TLearner:
    """Per-arm regressions whose difference estimates the effect."""

    model0: object
    model1: object
    label: str = "t_learner"

    def __call__(self, X) -> np.ndarray:
        return self.model1.predict(X) - self.model0.predict(X)

    def predictions(self, data, label: Optional[str] = None) -> HtePredictions:
        X = data.covariates if isinstance(data, TestDataset) else data
        return HtePredictions(self(X), label or self.label)


def _arms(train: TestDataset):
    ctrl, trt = train.treatment == 0, train.treatment == 1
    if not ctrl.any() or not trt.any():
        raise DomainError("training data needs both treatment arms")
    return ctrl, trt


def make_t_learner(train: TestDataset, family, seed: int = 0,
                   spec: Optional[LearnerSpec] = None) -> TLearner:
    """Fit ``family`` (Lasso or Boosting) separately per arm."""
    family = Family(family)
    if spec is None:
        if family is Family.LASSO:
            spec = LASSO_HTE
        elif family is Family.BOOSTING:
            spec = BOOSTING_HTE
        else:
            raise ConfigurationError(f"T-learner family must be Lasso or Boosting, got {family.value}")
    ctrl, trt = _arms(train)
    X, y = train.covariates, train.outcome
    m0 = spec.fit_regressor(X[ctrl], y[ctrl], seed=seed * 2)
    m1 = spec.fit_regressor(X[trt], y[trt], seed=seed * 2 + 1)
    return TLearner(m0, m1, label=family.value.lower())


def make_similar_pair(train: TestDataset, lambda1: float, lambda2: float) -> Tuple[TLearner, TLearner]:
    """Two lasso T-learners that differ only in the penalty."""
    if lambda1 == lambda2:
        raise ConfigurationError("the pair needs two different penalties")
    ctrl, trt = _arms(train)
    X, y = train.covariates, train.outcome
    pair = []
    for i, lam in enumerate((lambda1, lambda2), start=1):
        m0 = fit_lasso(X[ctrl], y[ctrl], lam)
        m1 = fit_lasso(X[trt], y[trt], lam)
        pair.append(TLearner(m0, m1, label=f"lasso_lambda{i}"))
    return pair[0], pair[1]
