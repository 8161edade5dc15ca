"""
Which of two effect estimators is better?
=========================================

Fit a lasso and a boosting T-learner on one sample, then judge them on a
held-out test set without knowing the true effect.
"""

from cate_judge import (
    Family,
    ScenarioConfig,
    compare_absolute,
    compare_relative,
    cross_fit,
    eif_absolute_error,
    eif_relative_error,
    gen_scenario,
    make_folds,
    make_t_learner,
    sample_dataset,
    true_errors,
)
from cate_judge.learners import BOOSTING_NUISANCE

# a nonlinear outcome surface with a linear propensity
dgp = gen_scenario(ScenarioConfig("B", seed=3))
train, _ = sample_dataset(dgp, 700, noise_sd=1.0, seed=1)
test, _ = sample_dataset(dgp, 2000, noise_sd=1.0, seed=2)

lasso = make_t_learner(train, Family.LASSO)
boost = make_t_learner(train, Family.BOOSTING)
p_lasso, p_boost = lasso.predictions(test, "lasso"), boost.predictions(test, "boosting")

# nuisance functions are learned on the test set itself, two-fold cross-fitted
nf = cross_fit(test, make_folds(test.n, 2, seed=0), BOOSTING_NUISANCE)

abs_lasso, _ = eif_absolute_error(p_lasso, test, nf, alpha=0.1)
abs_boost, _ = eif_absolute_error(p_boost, test, nf, alpha=0.1)
rel, _ = eif_relative_error(p_lasso, p_boost, test, nf, alpha=0.1)

print(f"absolute error, lasso:    {abs_lasso.point:.3f}  [{abs_lasso.ci_lo:.3f}, {abs_lasso.ci_hi:.3f}]")
print(f"absolute error, boosting: {abs_boost.point:.3f}  [{abs_boost.ci_lo:.3f}, {abs_boost.ci_hi:.3f}]")
print(f"relative error:           {rel.point:.3f}  [{rel.ci_lo:.3f}, {rel.ci_hi:.3f}]")
print("verdict from absolute intervals:", compare_absolute(abs_lasso, abs_boost).decision.value)
print("verdict from the relative interval:", compare_relative(rel).decision.value)

# the simulator knows the truth, so we can check the answer
truth = true_errors(dgp, lasso, boost, n_oracle=100_000)
print(f"true errors: lasso {truth.phi1:.3f}, boosting {truth.phi2:.3f}, difference {truth.delta:.3f}")
