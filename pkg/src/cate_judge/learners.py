"""From-scratch nuisance regressors/classifiers and the cross-fitting driver."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import (
    DomainError,
    FoldAssignment,
    FoldConfigurationError,
    NuisanceFit,
    TestDataset,
    make_rng,
)

CD_TOL = 1e-7
CD_MAX_SWEEPS = 100_000


# ---------------------------------------------------------------------------
# Linear models


@dataclass(frozen=True)
class LinearModel:
    """Affine predictor stored on the standardized scale.

    ``coefficients`` multiply ``(x - feature_means) / feature_sds``; constant
    columns carry ``sd = 1`` and a zero coefficient.
    """

    intercept: float
    coefficients: np.ndarray
    feature_means: np.ndarray
    feature_sds: np.ndarray
    lam: Optional[float] = None

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.intercept + ((X - self.feature_means) / self.feature_sds) @ self.coefficients

    @property
    def raw_coefficients(self) -> np.ndarray:
        return self.coefficients / self.feature_sds

    @property
    def raw_intercept(self) -> float:
        return float(self.intercept - self.feature_means @ self.raw_coefficients)


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DomainError(f"dimension mismatch: X {X.shape}, y {y.shape}")
    if X.shape[0] < 2:
        raise DomainError("need at least 2 observations")
    return X, y


def _standardize(X):
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    constant = sds <= 1e-12 * np.maximum(1.0, np.abs(means))
    sds = np.where(constant, 1.0, sds)
    Xs = (X - means) / sds
    Xs[:, constant] = 0.0
    return Xs, means, sds, constant


def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def _cd_path(gram, xty, lambdas, beta=None, tol=CD_TOL):
    """Coordinate descent over a decreasing lambda path with warm starts.

    Minimizes ``0.5 b'Gb - b'c + lam |b|_1`` (the standardized, centred lasso
    objective divided by n). Returns a ``len(lambdas) x d`` coefficient array.
    """
    d = gram.shape[0]
    G = gram.tolist()
    diag = [G[j][j] for j in range(d)]
    b = [0.0] * d if beta is None else list(beta)
    # grad[j] = c_j - (G b)_j
    grad = (xty - gram @ np.asarray(b, dtype=float)).tolist()
    active = [j for j in range(d) if diag[j] > 0]
    out = np.zeros((len(lambdas), d))
    for li, lam in enumerate(lambdas):
        for _ in range(CD_MAX_SWEEPS):
            max_delta = 0.0
            for j in active:
                old = b[j]
                new = _soft(grad[j] + diag[j] * old, lam) / diag[j]
                delta = new - old
                if delta != 0.0:
                    b[j] = new
                    Gj = G[j]
                    for k in range(d):
                        grad[k] -= Gj[k] * delta
                    if abs(delta) > max_delta:
                        max_delta = abs(delta)
            if max_delta < tol:
                break
        out[li] = b
    return out


def lambda_max(X, y) -> float:
    """Smallest penalty at which every standardized coefficient is zero."""
    X, y = _check_xy(X, y)
    Xs, *_ = _standardize(X)
    return float(np.max(np.abs(Xs.T @ (y - y.mean()))) / X.shape[0])


def lambda_grid(X, y, n_lambdas: int = 50, ratio: float = 1e-3) -> np.ndarray:
    lmax = lambda_max(X, y)
    if lmax == 0.0:
        return np.zeros(1)
    return np.geomspace(lmax, ratio * lmax, n_lambdas)


def _fit_lasso_path(X, y, lambdas):
    Xs, means, sds, _ = _standardize(X)
    n = X.shape[0]
    ybar = float(y.mean())
    gram = Xs.T @ Xs / n
    xty = Xs.T @ (y - ybar) / n
    betas = _cd_path(gram, xty, lambdas)
    return betas, ybar, means, sds


def fit_lasso(X, y, lam: Union[float, str] = "cv", cv_folds: int = 5, seed: int = 0) -> LinearModel:
    """L1-penalized least squares on standardized columns.

    ``lam="cv"`` picks the penalty minimizing ``cv_folds``-fold CV error over
    a 50-point log grid from ``lambda_max`` down to ``1e-3 * lambda_max``.
    """
    X, y = _check_xy(X, y)
    n = X.shape[0]
    if isinstance(lam, str):
        if lam != "cv":
            raise DomainError(f"unknown lambda spec {lam!r}")
        lam = _cv_lambda(X, y, cv_folds, seed)
    lam = float(lam)
    if lam < 0:
        raise DomainError("lambda must be non-negative")
    grid = lambda_grid(X, y)
    # warm-start through the grid points above lam
    path = [g for g in grid if g > lam] + [lam]
    betas, ybar, means, sds = _fit_lasso_path(X, y, np.asarray(path))
    return LinearModel(intercept=ybar, coefficients=betas[-1], feature_means=means,
                       feature_sds=sds, lam=lam)


def _cv_lambda(X, y, K, seed):
    n = X.shape[0]
    grid = lambda_grid(X, y)
    if grid.shape[0] == 1:
        return 0.0
    K = min(K, n)
    fold_of = np.empty(n, dtype=int)
    fold_of[make_rng(seed, "lasso-cv", n).permutation(n)] = np.arange(n) % K
    sse = np.zeros(grid.shape[0])
    for k in range(K):
        tr, te = fold_of != k, fold_of == k
        if tr.sum() < 2:
            continue
        betas, ybar, means, sds = _fit_lasso_path(X[tr], y[tr], grid)
        preds = ybar + ((X[te] - means) / sds) @ betas.T
        sse += ((preds - y[te][:, None]) ** 2).sum(axis=0)
    # first minimum along the decreasing grid favours the sparser model on ties
    return float(grid[int(np.argmin(sse))])


def fit_ols(X, y) -> LinearModel:
    X, y = _check_xy(X, y)
    Xs, means, sds, constant = _standardize(X)
    ybar = float(y.mean())
    coef = np.zeros(X.shape[1])
    keep = ~constant
    if keep.any():
        coef[keep] = np.linalg.lstsq(Xs[:, keep], y - ybar, rcond=None)[0]
    return LinearModel(intercept=ybar, coefficients=coef, feature_means=means, feature_sds=sds, lam=0.0)


# ---------------------------------------------------------------------------
# Propensity


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class PropensityModel:
    linear: LinearModel
    clip_eps: float = 0.01

    def predict(self, X) -> np.ndarray:
        p = _sigmoid(self.linear.predict(X))
        return np.clip(p, self.clip_eps, 1 - self.clip_eps)


def fit_logistic(X, w, clip_eps: float = 0.01, ridge: float = 1e-6,
                 max_iter: int = 100, tol: float = 1e-8) -> PropensityModel:
    """Lightly ridge-penalized logistic MLE by damped Newton steps."""
    X, w = _check_xy(X, w)
    Xs, means, sds, constant = _standardize(X)
    n, d = Xs.shape
    rate = float(w.mean())
    if rate in (0.0, 1.0):
        # single-class input: a saturated score that clips to the band edge
        lin = LinearModel(50.0 if rate == 1.0 else -50.0, np.zeros(d), means, sds)
        return PropensityModel(lin, clip_eps)

    Z = np.hstack([np.ones((n, 1)), Xs])
    pen = np.full(d + 1, ridge)
    pen[0] = 0.0

    def loss(beta):
        s = Z @ beta
        return float(np.mean(np.logaddexp(0.0, s) - w * s) + 0.5 * np.sum(pen * beta ** 2))

    beta = np.zeros(d + 1)
    beta[0] = np.log(rate / (1 - rate))
    current = loss(beta)
    for _ in range(max_iter):
        p = _sigmoid(Z @ beta)
        grad = Z.T @ (p - w) / n + pen * beta
        if np.max(np.abs(grad)) < tol:
            break
        hess = (Z * (p * (1 - p))[:, None]).T @ Z / n + np.diag(pen)
        hess[np.diag_indices_from(hess)] += 1e-12
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while t > 1e-10:
            cand = beta - t * step
            cand_loss = loss(cand)
            if cand_loss <= current:
                break
            t *= 0.5
        else:
            break
        beta, current = cand, cand_loss
    coef = beta[1:].copy()
    coef[constant] = 0.0
    lin = LinearModel(float(beta[0]), coef, means, sds)
    return PropensityModel(lin, clip_eps)


# ---------------------------------------------------------------------------
# Boosting


@dataclass(frozen=True)
class Tree:
    """Flat binary regression tree; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self._predict_columns(np.ascontiguousarray(X.T))

    def _predict_columns(self, cols: np.ndarray) -> np.ndarray:
        # route index sets down the tree; ``cols`` is the transposed design
        out = np.empty(cols.shape[1])
        stack = [(0, np.arange(cols.shape[1]))]
        while stack:
            i, idx = stack.pop()
            f = self.feature[i]
            if f < 0:
                out[idx] = self.value[i]
                continue
            go_left = cols[f, idx] <= self.threshold[i]
            stack.append((self.left[i], idx[go_left]))
            stack.append((self.right[i], idx[~go_left]))
        return out


def _best_split(X, order, r, mask):
    """Exhaustive threshold search; ties go to the lower feature, then lower threshold."""
    total = r[mask].sum()
    m = int(mask.sum())
    best = (0.0, -1, 0.0)
    if m < 2:
        return best
    base = total * total / m
    for j in range(X.shape[1]):
        o = order[:, j]
        o = o[mask[o]]
        xs = X[o, j]
        valid = xs[:-1] < xs[1:]
        if not valid.any():
            continue
        left_sum = np.cumsum(r[o])[:-1]
        n_left = np.arange(1, m)
        gain = left_sum ** 2 / n_left + (total - left_sum) ** 2 / (m - n_left) - base
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best[0]:
            best = (float(gain[i]), j, 0.5 * (xs[i] + xs[i + 1]))
    return best


def _fit_tree(X, order, r, max_depth):
    feature, threshold, left, right, value = [], [], [], [], []

    def grow(mask, depth):
        idx = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(r[mask].mean()))
        if depth >= max_depth:
            return idx
        gain, j, thr = _best_split(X, order, r, mask)
        if j < 0 or gain <= 1e-12 * max(1.0, abs(value[idx]) * mask.sum()):
            return idx
        feature[idx] = j
        threshold[idx] = thr
        goes_left = X[:, j] <= thr
        left[idx] = grow(mask & goes_left, depth + 1)
        right[idx] = grow(mask & ~goes_left, depth + 1)
        return idx

    grow(np.ones(X.shape[0], dtype=bool), 0)
    return Tree(np.array(feature), np.array(threshold), np.array(left),
                np.array(right), np.array(value))


@dataclass(frozen=True)
class BoostModel:
    base_score: float
    trees: tuple
    learning_rate: float
    max_depth: int

    @property
    def rounds(self) -> int:
        return len(self.trees)

    def predict(self, X, rounds: Optional[int] = None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        cols = np.ascontiguousarray(X.T)
        out = np.full(X.shape[0], self.base_score)
        for tree in self.trees[:rounds]:
            out += self.learning_rate * tree._predict_columns(cols)
        return out


def fit_boosting(X, y, max_depth: int = 2, rounds: int = 50, learning_rate: float = 0.3) -> BoostModel:
    """Squared-loss gradient boosting with depth-limited trees."""
    X, y = _check_xy(X, y)
    if rounds < 0 or max_depth < 0:
        raise DomainError("rounds and max_depth must be non-negative")
    if not 0 < learning_rate <= 1:
        raise DomainError("learning_rate must lie in (0, 1]")
    order = np.argsort(X, axis=0, kind="stable")
    base = float(y.mean())
    resid = y - base
    trees = []
    for _ in range(rounds):
        tree = _fit_tree(X, order, resid, max_depth)
        resid = resid - learning_rate * tree.predict(X)
        trees.append(tree)
    return BoostModel(base, tuple(trees), learning_rate, max_depth)


# ---------------------------------------------------------------------------
# Learner specs and cross-fitting


class Family(str, enum.Enum):
    OLS = "OLS"
    LASSO = "Lasso"
    BOOSTING = "Boosting"
    LOGISTIC = "Logistic"


@dataclass(frozen=True)
class LearnerSpec:
    family: Family
    lam: Union[float, str] = "cv"
    cv_folds: int = 5
    max_depth: int = 2
    rounds: int = 50
    learning_rate: float = 0.3
    clip_eps: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not 0 < self.clip_eps < 0.5:
            raise DomainError("clip_eps must lie in (0, 0.5)")
        if self.rounds < 0 or self.max_depth < 0 or not 0 < self.learning_rate <= 1:
            raise DomainError("boosting hyperparameters out of range")
        if self.cv_folds < 2:
            raise DomainError("cv_folds must be >= 2")

    def fit_regressor(self, X, y, seed: int = 0):
        if self.family is Family.OLS:
            return fit_ols(X, y)
        if self.family is Family.LASSO:
            return fit_lasso(X, y, self.lam, self.cv_folds, seed)
        if self.family is Family.BOOSTING:
            return fit_boosting(X, y, self.max_depth, self.rounds, self.learning_rate)
        raise DomainError(f"{self.family.value} is not an outcome regressor")

    def fit_propensity(self, X, w, seed: int = 0):
        """Returns a callable ``X -> e(X)`` clipped to the band."""
        if self.family is Family.LOGISTIC:
            return fit_logistic(X, w, self.clip_eps).predict
        # regression on the 0/1 labels, clipped
        model = self.fit_regressor(X, w, seed)
        eps = self.clip_eps
        return lambda Z: np.clip(model.predict(Z), eps, 1 - eps)


# well-fitted defaults for nuisance duty and the deliberately underfit variant
BOOSTING_NUISANCE = LearnerSpec(Family.BOOSTING, max_depth=2, rounds=50, learning_rate=0.3)
UNDERFIT_BOOSTING = LearnerSpec(Family.BOOSTING, max_depth=1, rounds=3, learning_rate=0.3)
LOGISTIC = LearnerSpec(Family.LOGISTIC)


def cross_fit(dataset: TestDataset, folds: FoldAssignment, outcome_spec: LearnerSpec,
              propensity_spec: LearnerSpec = LOGISTIC, seed: int = 0) -> NuisanceFit:
    """Fill each unit's nuisance values from models that never saw its fold."""
    if folds.fold_of.shape[0] != dataset.n:
        raise DomainError("fold assignment does not match the dataset size")
    X, w, y = dataset.covariates, dataset.treatment, dataset.outcome
    mu0 = np.empty(dataset.n)
    mu1 = np.empty(dataset.n)
    e = np.empty(dataset.n)
    for k in range(folds.K):
        test = folds.fold_of == k
        train = ~test
        ctrl, trt = train & (w == 0), train & (w == 1)
        if not ctrl.any() or not trt.any():
            arm = "control" if not ctrl.any() else "treated"
            raise FoldConfigurationError(f"fold {k}: complement has no {arm} units", fold=k)
        m0 = outcome_spec.fit_regressor(X[ctrl], y[ctrl], seed=seed * 1000 + 2 * k)
        m1 = outcome_spec.fit_regressor(X[trt], y[trt], seed=seed * 1000 + 2 * k + 1)
        prop = propensity_spec.fit_propensity(X[train], w[train], seed=seed)
        mu0[test] = m0.predict(X[test])
        mu1[test] = m1.predict(X[test])
        e[test] = prop(X[test])
    e = np.clip(e, propensity_spec.clip_eps, 1 - propensity_spec.clip_eps)
    return NuisanceFit(mu0, mu1, e, propensity_spec.clip_eps)


def predict_true_nuisance(dgp, dataset: TestDataset, clip_eps: float = 0.01) -> NuisanceFit:
    """Oracle nuisances evaluated from a data-generating process.

    ``dgp`` needs vectorized ``mu0``, ``mu1`` and ``e`` methods.
    """
    X = dataset.covariates
    e = dgp.e(X)
    if np.any(e < clip_eps) or np.any(e > 1 - clip_eps):
        e = np.clip(e, clip_eps, 1 - clip_eps)
    return NuisanceFit(dgp.mu0(X), dgp.mu1(X), e, clip_eps)
