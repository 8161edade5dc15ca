"""Shared domain types, fold splitting, the AIPW score and CI assembly."""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass

import numpy as np
from scipy import stats


class ConfigurationError(ValueError):
    """Raised for invalid configuration (fold counts, alphas, flags)."""


class FoldConfigurationError(ConfigurationError):
    """A cross-fitting fold leaves a treatment arm empty in its complement."""

    def __init__(self, message: str, fold: int):
        super().__init__(message)
        self.fold = fold


class DomainError(ValueError):
    """Raised when an input lies outside the mathematical domain of an operation."""


def make_rng(seed: int, tag: str, *index: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, tag, index...)``.

    Streams for different keys are independent, so the order in which
    replications run cannot change any of them.
    """
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(tag.encode("utf-8"))]
    key.extend(int(i) for i in index)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TestDataset:
    """Held-out units ``(X, W, Y)`` used to evaluate HTE estimators."""

    __test__ = False  # not a pytest class

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray

    def __post_init__(self):
        X = _as_float_array(self.covariates, "covariates")
        if X.ndim == 1:
            X = X.reshape(-1, 1)
            X.setflags(write=False)
        if X.ndim != 2 or X.shape[1] < 1:
            raise DomainError("covariates must be an n x d matrix with d >= 1")
        w = _as_float_array(self.treatment, "treatment")
        y = _as_float_array(self.outcome, "outcome")
        n = X.shape[0]
        if w.shape != (n,) or y.shape != (n,):
            raise DomainError(
                f"treatment/outcome lengths {w.shape}/{y.shape} do not match n={n}"
            )
        if not np.all((w == 0) | (w == 1)):
            raise DomainError("treatment entries must be 0 or 1")
        if n < 2:
            raise DomainError("a dataset needs at least 2 units")
        if w.sum() == 0 or w.sum() == n:
            raise DomainError("both treatment arms must be non-empty")
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "treatment", w)
        object.__setattr__(self, "outcome", y)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    def subset(self, idx) -> "TestDataset":
        return TestDataset(self.covariates[idx], self.treatment[idx], self.outcome[idx])


@dataclass(frozen=True)
class HtePredictions:
    """One candidate estimator evaluated at every test unit."""

    values: np.ndarray
    label: str = "tau_hat"

    def __post_init__(self):
        v = _as_float_array(self.values, f"predictions '{self.label}'")
        if v.ndim != 1:
            raise DomainError("predictions must be a 1-d array")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    K: int

    def indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == k)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.K)


@dataclass(frozen=True)
class NuisanceFit:
    """Out-of-fold predictions of ``mu0``, ``mu1`` and ``e`` for each test unit."""

    mu0_hat: np.ndarray
    mu1_hat: np.ndarray
    e_hat: np.ndarray
    clip_eps: float = 0.01

    def __post_init__(self):
        if not 0 < self.clip_eps < 0.5:
            raise ConfigurationError("clip_eps must lie in (0, 0.5)")
        arrays = {}
        for name in ("mu0_hat", "mu1_hat", "e_hat"):
            arrays[name] = _as_float_array(getattr(self, name), name)
        n = arrays["mu0_hat"].shape[0]
        if any(a.shape != (n,) for a in arrays.values()):
            raise DomainError("nuisance arrays must share one length")
        e = arrays["e_hat"]
        # tolerate float noise at the band edges
        tol = 1e-12
        if np.any(e < self.clip_eps - tol) or np.any(e > 1 - self.clip_eps + tol):
            raise DomainError("e_hat leaves the clipping band")
        for name, a in arrays.items():
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return self.mu0_hat.shape[0]


@dataclass(frozen=True)
class InfluenceValues:
    """Per-unit summands whose mean is the one-step estimate."""

    psi_plus: np.ndarray
    n_clamped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "psi_plus", _as_float_array(self.psi_plus, "psi_plus"))


@dataclass(frozen=True)
class ErrorEstimate:
    point: float
    var_hat: float
    se: float
    ci_lo: float
    ci_hi: float
    alpha: float
    n: int

    @property
    def width(self) -> float:
        return self.ci_hi - self.ci_lo

    def covers(self, value: float) -> bool:
        return self.ci_lo <= value <= self.ci_hi

    def to_dict(self) -> dict:
        return {
            "point": self.point,
            "var_hat": self.var_hat,
            "se": self.se,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "alpha": self.alpha,
            "n": self.n,
        }


class Decision(str, enum.Enum):
    SELECT_FIRST = "SelectFirst"
    SELECT_SECOND = "SelectSecond"
    INCONCLUSIVE = "Inconclusive"


class Basis(str, enum.Enum):
    ABSOLUTE_DISJOINT = "AbsoluteDisjoint"
    RELATIVE_SIGN = "RelativeSign"


@dataclass(frozen=True)
class ComparisonVerdict:
    decision: Decision
    basis: Basis
    confidence_level: float

    def to_dict(self) -> dict:
        return {
            "decision": self.decision.value,
            "basis": self.basis.value,
            "confidence_level": self.confidence_level,
        }


def make_folds(n: int, K: int, seed: int) -> FoldAssignment:
    """Balanced random partition of ``range(n)`` into ``K`` folds."""
    if K < 2 or 2 * K > n:
        raise ConfigurationError(f"fold count K={K} must satisfy 2 <= K <= n/2 (n={n})")
    perm = make_rng(seed, "folds", n, K).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % K
    fold_of.setflags(write=False)
    return FoldAssignment(fold_of=fold_of, K=K)


def aipw_score(w, y, mu0, mu1, e):
    """AIPW pseudo-outcome; conditionally unbiased for ``tau(x)`` at the true nuisances.

    Works elementwise on scalars or arrays.
    """
    e = np.asarray(e, dtype=float)
    if np.any((e <= 0) | (e >= 1)):
        raise DomainError("propensity must lie strictly inside (0, 1)")
    out = w * (y - mu1) / e + mu1 - (1 - w) * (y - mu0) / (1 - e) - mu0
    return float(out) if np.ndim(out) == 0 else out


def normal_quantile(p: float) -> float:
    if not 0 < p < 1:
        raise DomainError(f"quantile level {p} outside (0, 1)")
    return float(stats.norm.ppf(p))


def mean_and_ci(psi_plus, alpha: float) -> ErrorEstimate:
    """Point estimate, divide-by-n variance and the normal CI of the mean.

    ``psi_plus`` may be an :class:`InfluenceValues` or a plain array.
    """
    values = psi_plus.psi_plus if isinstance(psi_plus, InfluenceValues) else np.asarray(psi_plus, float)
    n = values.shape[0]
    if n == 0:
        raise DomainError("no influence values")
    if n < 2:
        raise DomainError("need at least 2 influence values")
    if not 0 < alpha < 1:
        raise ConfigurationError(f"alpha={alpha} must lie in (0, 1)")
    if np.all(values == values[0]):
        point, var_hat = float(values[0]), 0.0
    else:
        point = float(values.mean())
        var_hat = float(np.mean((values - point) ** 2))
    se = float(np.sqrt(var_hat / n))
    half = normal_quantile(1 - alpha / 2) * se
    return ErrorEstimate(
        point=point, var_hat=var_hat, se=se,
        ci_lo=point - half, ci_hi=point + half, alpha=alpha, n=n,
    )
