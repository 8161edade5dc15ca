"""Random inputs and oracles shared by the unit and acceptance tests."""

import numpy as np

from cate_judge.core import HtePredictions, NuisanceFit, TestDataset


def random_instance(seed: int, n_range=(10, 500), d_range=(1, 20)):
    """A dataset, a nuisance fit and two prediction vectors with no structure."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    d = int(rng.integers(d_range[0], d_range[1] + 1))
    X = rng.normal(size=(n, d))
    w = (rng.random(n) < 0.5).astype(float)
    w[0], w[1] = 0.0, 1.0
    y = rng.normal(size=n) * rng.uniform(0.5, 3)
    nf = NuisanceFit(rng.normal(size=n), rng.normal(size=n), rng.uniform(0.01, 0.99, n), 0.01)
    t1 = HtePredictions(rng.normal(size=n), "a")
    t2 = HtePredictions(rng.normal(size=n), "b")
    return TestDataset(X, w, y), nf, t1, t2


def kkt_violation(X, y, model):
    """Largest KKT violation of a lasso solution, recomputed from scratch."""
    n = X.shape[0]
    mean, sd = X.mean(axis=0), X.std(axis=0)
    Xs = (X - mean) / sd
    beta = model.coefficients
    resid = y - y.mean() - Xs @ beta
    corr = Xs.T @ resid / n
    lam = model.lam
    worst = 0.0
    for j in range(X.shape[1]):
        if beta[j] == 0:
            worst = max(worst, abs(corr[j]) - lam)
        else:
            worst = max(worst, abs(corr[j] - lam * np.sign(beta[j])))
    return worst
