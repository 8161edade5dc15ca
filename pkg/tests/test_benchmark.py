import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cate_judge.benchmark import (
    DgpSpec,
    ScenarioConfig,
    gen_scenario,
    make_similar_pair,
    make_t_learner,
    sample_dataset,
    true_errors,
)
from cate_judge.core import ConfigurationError, DomainError
from cate_judge.learners import Family, predict_true_nuisance


def test_scenario_a_at_origin_is_intercept():
    dgp = gen_scenario(ScenarioConfig("A", seed=3))
    x0 = np.zeros((1, dgp.d))
    assert dgp.mu0(x0)[0] == dgp.score0.intercept
    assert dgp.mu1(x0)[0] == dgp.score1.intercept


@settings(max_examples=40, deadline=None)
@given(st.sampled_from("ABCD"), st.integers(5, 60), st.floats(0.01, 0.2), st.integers(0, 10 ** 6))
def test_active_set_and_propensity_band(scenario, d, frac, seed):
    dgp = gen_scenario(ScenarioConfig(scenario, d=d, active_fraction=frac, seed=seed))
    assert 1 <= len(dgp.active) <= max(1, 0.2 * d)
    X = dgp.sample_covariates(200, np.random.default_rng(seed)) * 3
    e = dgp.e(X)
    assert np.all((e >= 0.05) & (e <= 0.95))


def test_small_d_rejected():
    with pytest.raises(ConfigurationError):
        ScenarioConfig("A", d=4)
    with pytest.raises(ConfigurationError):
        ScenarioConfig("E")


def _second_difference(fn, d, j, rng):
    x = rng.normal(size=d)
    h = np.zeros(d)
    h[j] = 0.7
    pts = np.vstack([x - h, x, x + h])
    v = fn(pts)
    return v[0] - 2 * v[1] + v[2]


@pytest.mark.parametrize("scenario, linear_mu, linear_e", [
    ("A", True, True), ("B", False, True), ("C", True, False), ("D", False, False),
])
def test_linearity_pattern(scenario, linear_mu, linear_e):
    dgp = gen_scenario(ScenarioConfig(scenario, seed=5))
    rng = np.random.default_rng(0)
    d2_mu = max(abs(_second_difference(dgp.mu0, dgp.d, j, rng)) for j in dgp.active)
    assert (d2_mu < 1e-12) == linear_mu
    score_e = lambda X: dgp.score_e(X[:, dgp.active])
    d2_e = max(abs(_second_difference(score_e, dgp.d, j, rng)) for j in dgp.active)
    assert (d2_e < 1e-12) == linear_e


def test_sample_dataset_noiseless_and_deterministic():
    dgp = gen_scenario(ScenarioConfig("B", seed=1))
    ds, tau = sample_dataset(dgp, 200, 0.0, seed=4)
    expected = np.where(ds.treatment == 1, dgp.mu1(ds.covariates), dgp.mu0(ds.covariates))
    np.testing.assert_array_equal(ds.outcome, expected)
    np.testing.assert_array_equal(tau, dgp.tau(ds.covariates))
    again, _ = sample_dataset(dgp, 200, 0.0, seed=4)
    np.testing.assert_array_equal(ds.covariates, again.covariates)


def test_treatment_rate_concentrates():
    dgp = gen_scenario(ScenarioConfig("C", seed=2))
    n = 100_000
    ds, _ = sample_dataset(dgp, n, 1.0, seed=9)
    assert abs(ds.treatment.mean() - dgp.e(ds.covariates).mean()) <= 4 * np.sqrt(0.25 / n)


def test_true_errors_examples():
    dgp = gen_scenario(ScenarioConfig("A", seed=6))
    exact = true_errors(dgp, dgp.tau, lambda X: dgp.tau(X) + 1.0, 10_000, seed=0)
    assert exact.phi1 == 0.0
    assert exact.phi2 == pytest.approx(1.0, abs=1e-12)
    assert exact.delta == exact.phi1 - exact.phi2
    slope = true_errors(dgp, dgp.tau, lambda X: dgp.tau(X) + X[:, 0], 100_000, seed=1)
    assert abs(slope.phi2 - 1.0) <= 4 * slope.phi2_se
    with pytest.raises(ConfigurationError):
        true_errors(dgp, dgp.tau, dgp.tau, 9_999)


def test_dgp_json_round_trip():
    dgp = gen_scenario(ScenarioConfig("D", seed=8))
    back = DgpSpec.from_dict(json.loads(json.dumps(dgp.to_dict())))
    X = dgp.sample_covariates(50, np.random.default_rng(0))
    for fn in ("mu0", "mu1", "e", "tau"):
        np.testing.assert_array_equal(getattr(dgp, fn)(X), getattr(back, fn)(X))


def test_predict_true_nuisance_matches_dgp():
    dgp = gen_scenario(ScenarioConfig("C", seed=3))
    ds, _ = sample_dataset(dgp, 100, 1.0, seed=0)
    nf = predict_true_nuisance(dgp, ds)
    np.testing.assert_array_equal(nf.e_hat, dgp.e(ds.covariates))
    np.testing.assert_array_equal(nf.mu1_hat, dgp.mu1(ds.covariates))


def test_lasso_t_learner_improves_with_n():
    dgp = gen_scenario(ScenarioConfig("A", seed=2))
    test, tau = sample_dataset(dgp, 2000, 0.0, seed=99)
    mse = []
    for n in (200, 2000):
        train, _ = sample_dataset(dgp, n, 0.0, seed=n)
        mse.append(np.mean((make_t_learner(train, Family.LASSO)(test.covariates) - tau) ** 2))
    assert mse[1] < mse[0]


def test_constant_effect_mean():
    means = []
    for seed in range(20):
        base = gen_scenario(ScenarioConfig("A", seed=seed))
        dgp = DgpSpec(base.scenario, base.d, base.active, base.score0,
                      type(base.score0)(base.score0.intercept + 3.0, base.score0.linear,
                                        base.score0.quadratic, base.score0.interaction),
                      base.score_e)
        train, _ = sample_dataset(dgp, 1000, 1.0, seed=seed)
        means.append(make_t_learner(train, Family.LASSO, seed)(train.covariates).mean())
    assert abs(np.mean(means) - 3.0) <= 0.5


def test_t_learner_determinism_and_errors():
    dgp = gen_scenario(ScenarioConfig("B", seed=0))
    train, _ = sample_dataset(dgp, 300, 1.0, seed=0)
    a = make_t_learner(train, Family.BOOSTING, 3)(train.covariates)
    b = make_t_learner(train, Family.BOOSTING, 3)(train.covariates)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(DomainError):
        make_t_learner(_treated_only(train), Family.LASSO)
    with pytest.raises(ConfigurationError):
        make_t_learner(train, Family.OLS)


def _treated_only(train):
    # TestDataset itself rejects single-arm data, so build a stand-in
    class Stub:
        covariates = train.covariates
        outcome = train.outcome
        treatment = np.ones(train.n)
    return Stub()


def test_similar_pair():
    dgp = gen_scenario(ScenarioConfig("A", seed=1))
    train, _ = sample_dataset(dgp, 500, 1.0, seed=1)
    with pytest.raises(ConfigurationError):
        make_similar_pair(train, 0.05, 0.05)
    a, b = make_similar_pair(train, 0.05, 0.05 * (1 + 1e-9))
    assert np.max(np.abs(a(train.covariates) - b(train.covariates))) < 1e-3
    a, b = make_similar_pair(train, 0.01, 0.5)
    assert np.mean((a(train.covariates) - b(train.covariates)) ** 2) > 0
