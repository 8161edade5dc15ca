import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from cate_judge.core import (
    ConfigurationError,
    DomainError,
    InfluenceValues,
    NuisanceFit,
    TestDataset,
    aipw_score,
    make_folds,
    make_rng,
    mean_and_ci,
    normal_quantile,
)


def _cdf_by_quadrature(q):
    pdf = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
    return 0.5 + math.copysign(integrate.quad(pdf, 0, abs(q), epsabs=1e-13)[0], q)


def _quantile_by_bisection(p):
    lo, hi = -10.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _cdf_by_quadrature(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_quantile_oracle_values():
    # frozen from the bisection/quadrature oracle above
    assert _quantile_by_bisection(0.95) == pytest.approx(1.644853626951471, abs=1e-9)
    assert _quantile_by_bisection(0.975) == pytest.approx(1.9599639845400523, abs=1e-9)


@pytest.mark.parametrize("p, expected", [(0.5, 0.0), (0.95, 1.64485), (0.975, 1.95996)])
def test_normal_quantile_examples(p, expected):
    assert normal_quantile(p) == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize("p", [0.01, 0.2, 0.7, 0.95, 0.975, 0.999])
def test_normal_quantile_matches_oracle(p):
    assert normal_quantile(p) == pytest.approx(_quantile_by_bisection(p), abs=1e-8)


@given(st.floats(1e-6, 1 - 1e-6))
def test_normal_quantile_antisymmetric(p):
    assert normal_quantile(p) == pytest.approx(-normal_quantile(1 - p), abs=1e-10)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.2, 1.5])
def test_normal_quantile_domain(p):
    with pytest.raises(DomainError):
        normal_quantile(p)


def test_make_folds_examples():
    f = make_folds(4, 2, seed=1)
    assert sorted(f.sizes()) == [2, 2]
    f = make_folds(5, 2, seed=1)
    assert sorted(f.sizes()) == [2, 3]
    a = make_folds(100, 2, seed=7)
    b = make_folds(100, 2, seed=7)
    np.testing.assert_array_equal(a.fold_of, b.fold_of)


@pytest.mark.parametrize("n, K", [(10, 1), (10, 6), (3, 2)])
def test_make_folds_rejects_bad_K(n, K):
    with pytest.raises(ConfigurationError):
        make_folds(n, K, 0)


@settings(max_examples=200)
@given(st.integers(4, 400), st.integers(2, 10), st.integers(0, 2 ** 63))
def test_folds_partition(n, K, seed):
    if 2 * K > n:
        return
    f = make_folds(n, K, seed)
    assert f.fold_of.shape == (n,)
    sizes = f.sizes()
    assert sizes.sum() == n
    assert sizes.min() >= 1
    assert sizes.max() - sizes.min() <= 1
    covered = np.concatenate([f.indices(k) for k in range(K)])
    np.testing.assert_array_equal(np.sort(covered), np.arange(n))


def test_rng_streams_are_keyed():
    a = make_rng(3, "x", 1).random(4)
    np.testing.assert_array_equal(a, make_rng(3, "x", 1).random(4))
    assert not np.array_equal(a, make_rng(3, "x", 2).random(4))
    assert not np.array_equal(a, make_rng(3, "y", 1).random(4))


@pytest.mark.parametrize(
    "kw, expected",
    [
        (dict(w=1, y=1.0, mu0=0.0, mu1=1.0, e=0.3), 1.0),
        (dict(w=1, y=2.0, mu0=0.0, mu1=1.0, e=0.5), 3.0),
        (dict(w=0, y=0.0, mu0=0.0, mu1=1.0, e=0.5), 1.0),
    ],
)
def test_aipw_score_examples(kw, expected):
    assert aipw_score(**kw) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("e", [0.0, 1.0, -0.1])
def test_aipw_score_domain(e):
    with pytest.raises(DomainError):
        aipw_score(1, 0.0, 0.0, 0.0, e)


@settings(max_examples=100)
@given(
    st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.05, 0.95)), min_size=1, max_size=6)
)
def test_aipw_unbiased_by_enumeration(cells):
    # each covariate value x: (mu0(x), mu1(x), e(x)), noiseless outcomes
    for mu0, mu1, e in cells:
        expected = (
            e * aipw_score(1, mu1, mu0, mu1, e)
            + (1 - e) * aipw_score(0, mu0, mu0, mu1, e)
        )
        assert expected == pytest.approx(mu1 - mu0, abs=1e-12)


def test_mean_and_ci_constant():
    est = mean_and_ci(np.array([0.3, 0.3, 0.3]), 0.1)
    assert est.point == 0.3 and est.se == 0.0 and est.var_hat == 0.0
    assert est.ci_lo == est.ci_hi == 0.3


def test_mean_and_ci_two_points():
    est = mean_and_ci(np.array([0.0, 2.0]), 0.1)
    assert est.point == 1.0
    assert est.var_hat == 1.0
    assert est.se == pytest.approx(math.sqrt(0.5))
    # 1 -/+ 1.6448536 * sqrt(1/2)
    assert est.ci_lo == pytest.approx(-0.163087, abs=1e-6)
    assert est.ci_hi == pytest.approx(2.163087, abs=1e-6)


@given(
    st.lists(st.floats(-100, 100), min_size=2, max_size=50),
    st.floats(-50, 50),
    st.floats(0.01, 0.5),
)
def test_mean_and_ci_shift_and_symmetry(values, shift, alpha):
    v = np.array(values)
    a = mean_and_ci(v, alpha)
    b = mean_and_ci(v + shift, alpha)
    assert b.point == pytest.approx(a.point + shift, abs=1e-9)
    assert b.se == pytest.approx(a.se, abs=1e-9)
    assert (a.point - a.ci_lo) == pytest.approx(a.ci_hi - a.point, abs=1e-12)
    assert a.ci_lo <= a.point <= a.ci_hi
    assert a.width == pytest.approx(2 * normal_quantile(1 - alpha / 2) * a.se, rel=1e-12, abs=1e-15)
    if np.all(v == v[0]):
        assert a.se == 0
    elif a.se == 0:
        # squared deviations below ~1e-154 underflow to zero
        assert np.ptp(v) < 1e-150


def test_mean_and_ci_errors():
    with pytest.raises(DomainError):
        mean_and_ci(np.array([]), 0.1)
    with pytest.raises(ConfigurationError):
        mean_and_ci(np.array([1.0, 2.0]), 1.5)
    est = mean_and_ci(InfluenceValues(np.array([1.0, 3.0])), 0.2)
    assert est.point == 2.0


def test_dataset_validation():
    X = np.zeros((4, 2))
    TestDataset(X, [0, 1, 0, 1], [0.0, 1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        TestDataset(X, [0, 2, 0, 1], [0.0] * 4)
    with pytest.raises(DomainError):
        TestDataset(X, [1, 1, 1, 1], [0.0] * 4)
    with pytest.raises(DomainError):
        TestDataset(X, [0, 1, 0, 1], [0.0, np.nan, 0.0, 0.0])
    with pytest.raises(DomainError):
        TestDataset(X, [0, 1, 0], [0.0] * 3)


def test_nuisance_fit_band():
    NuisanceFit(np.zeros(2), np.zeros(2), np.array([0.01, 0.99]), 0.01)
    with pytest.raises(DomainError):
        NuisanceFit(np.zeros(2), np.zeros(2), np.array([0.001, 0.5]), 0.01)
