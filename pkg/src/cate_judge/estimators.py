"""Absolute- and relative-error estimators for HTE predictions, plus verdicts.

Every estimator returns ``(ErrorEstimate, InfluenceValues)``: the per-unit
summands are kept so callers can re-derive intervals at another level.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .core import (
    Basis,
    ComparisonVerdict,
    ConfigurationError,
    Decision,
    DomainError,
    ErrorEstimate,
    HtePredictions,
    InfluenceValues,
    NuisanceFit,
    TestDataset,
    aipw_score,
    mean_and_ci,
)

Result = Tuple[ErrorEstimate, InfluenceValues]


class LinkTag(str, enum.Enum):
    IDENTITY = "identity"
    LOG = "log"
    LOGIT = "logit"


@dataclass(frozen=True)
class LinkFunction:
    """Maps a conditional mean to the natural-parameter scale."""

    tag: LinkTag = LinkTag.IDENTITY
    mean_floor: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "tag", LinkTag(self.tag))

    def guard(self, mu: np.ndarray) -> Tuple[np.ndarray, int]:
        """Clamp means into the link's domain; returns ``(mu, n_clamped)``."""
        mu = np.asarray(mu, dtype=float)
        if self.tag is LinkTag.IDENTITY:
            return mu, 0
        if self.tag is LinkTag.LOG:
            out = np.maximum(mu, self.mean_floor)
        else:
            out = np.clip(mu, self.mean_floor, 1 - self.mean_floor)
        return out, int(np.count_nonzero(out != mu))

    def eta(self, mu):
        mu = np.asarray(mu, dtype=float)
        if self.tag is LinkTag.IDENTITY:
            return mu
        if self.tag is LinkTag.LOG:
            return np.log(mu)
        return np.log(mu / (1 - mu))

    def eta_prime(self, mu):
        mu = np.asarray(mu, dtype=float)
        if self.tag is LinkTag.IDENTITY:
            return np.ones_like(mu)
        if self.tag is LinkTag.LOG:
            return 1.0 / mu
        return 1.0 / (mu * (1 - mu))


IDENTITY = LinkFunction(LinkTag.IDENTITY)


def _unpack(dataset: TestDataset, nf: NuisanceFit, *preds: HtePredictions):
    n = dataset.n
    if nf.n != n:
        raise DomainError(f"nuisance fit has {nf.n} units, dataset has {n}")
    for p in preds:
        if len(p) != n:
            raise DomainError(f"predictions '{p.label}' have length {len(p)}, dataset has {n}")
    return dataset.treatment, dataset.outcome, nf.mu0_hat, nf.mu1_hat, nf.e_hat


def eif_absolute_error(tau_hat: HtePredictions, dataset: TestDataset, nf: NuisanceFit,
                       alpha: float = 0.1) -> Result:
    """One-step estimate of ``E[(tau_hat - tau)^2]``.

    The estimate is reported as-is; with poor nuisances it can be negative.
    """
    w, y, mu0, mu1, e = _unpack(dataset, nf, tau_hat)
    diff = (mu1 - mu0) - tau_hat.values
    corr = w * (y - mu1) / e - (1 - w) * (y - mu0) / (1 - e)
    psi = InfluenceValues(diff ** 2 + 2 * diff * corr)
    return mean_and_ci(psi, alpha), psi


def plugin_absolute_error(tau_hat: HtePredictions, dataset: TestDataset, nf: NuisanceFit,
                          alpha: float = 0.1) -> Result:
    """Mean squared gap between ``tau_hat`` and the per-unit AIPW pseudo-outcome."""
    w, y, mu0, mu1, e = _unpack(dataset, nf, tau_hat)
    gamma = aipw_score(w, y, mu0, mu1, e)
    psi = InfluenceValues((tau_hat.values - gamma) ** 2)
    return mean_and_ci(psi, alpha), psi


def eif_relative_error(tau1: HtePredictions, tau2: HtePredictions, dataset: TestDataset,
                       nf: NuisanceFit, alpha: float = 0.1) -> Result:
    """One-step estimate of ``phi(tau1) - phi(tau2)``; negative favours ``tau1``."""
    w, y, mu0, mu1, e = _unpack(dataset, nf, tau1, tau2)
    t1, t2 = tau1.values, tau2.values
    gamma = aipw_score(w, y, mu0, mu1, e)
    psi = InfluenceValues(t1 ** 2 - t2 ** 2 - 2 * (t1 - t2) * gamma)
    return mean_and_ci(psi, alpha), psi


def _link_terms(nf: NuisanceFit, link: LinkFunction):
    mu0, c0 = link.guard(nf.mu0_hat)
    mu1, c1 = link.guard(nf.mu1_hat)
    with np.errstate(all="ignore"):
        eta0, eta1 = link.eta(mu0), link.eta(mu1)
        d0, d1 = link.eta_prime(mu0), link.eta_prime(mu1)
    for name, arr in (("eta0", eta0), ("eta1", eta1), ("eta0'", d0), ("eta1'", d1)):
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise DomainError(f"{link.tag.value} link undefined for unit {int(bad[0])} ({name})")
    return mu0, mu1, eta0, eta1, d0, d1, c0 + c1


def dina_absolute_error(tau_hat: HtePredictions, dataset: TestDataset, nf: NuisanceFit,
                        link: LinkFunction = IDENTITY, alpha: float = 0.1) -> Result:
    """Absolute error for an effect defined on the link scale.

    The outcome residuals are mapped through ``eta'`` evaluated at the fitted
    means. ``InfluenceValues.n_clamped`` counts means moved into the link domain.
    """
    w, y, _, _, e = _unpack(dataset, nf, tau_hat)
    mu0, mu1, eta0, eta1, d0, d1, clamped = _link_terms(nf, link)
    diff = (eta1 - eta0) - tau_hat.values
    corr = w * d1 * (y - mu1) / e - (1 - w) * d0 * (y - mu0) / (1 - e)
    psi = InfluenceValues(diff ** 2 + 2 * diff * corr, n_clamped=clamped)
    return mean_and_ci(psi, alpha), psi


def dina_relative_error(tau1: HtePredictions, tau2: HtePredictions, dataset: TestDataset,
                        nf: NuisanceFit, link: LinkFunction = IDENTITY,
                        alpha: float = 0.1) -> Result:
    w, y, _, _, e = _unpack(dataset, nf, tau1, tau2)
    mu0, mu1, eta0, eta1, d0, d1, clamped = _link_terms(nf, link)
    t1, t2 = tau1.values, tau2.values
    gamma = w * d1 * (y - mu1) / e + eta1 - (1 - w) * d0 * (y - mu0) / (1 - e) - eta0
    psi = InfluenceValues(t1 ** 2 - t2 ** 2 - 2 * (t1 - t2) * gamma, n_clamped=clamped)
    return mean_and_ci(psi, alpha), psi


def compare_absolute(est1: ErrorEstimate, est2: ErrorEstimate) -> ComparisonVerdict:
    """Select only when the two intervals are disjoint (confidence ``1 - 2 alpha``)."""
    if est1.alpha != est2.alpha:
        raise ConfigurationError(f"alpha mismatch: {est1.alpha} vs {est2.alpha}")
    if est1.n != est2.n:
        raise ConfigurationError(f"sample size mismatch: {est1.n} vs {est2.n}")
    if est1.ci_lo > est2.ci_hi:
        decision = Decision.SELECT_SECOND
    elif est2.ci_lo > est1.ci_hi:
        decision = Decision.SELECT_FIRST
    else:
        decision = Decision.INCONCLUSIVE
    return ComparisonVerdict(decision, Basis.ABSOLUTE_DISJOINT, 1 - 2 * est1.alpha)


def compare_relative(est: ErrorEstimate) -> ComparisonVerdict:
    """Verdict from a relative-error interval ordered as ``(tau1, tau2)``."""
    if est.ci_lo > 0:
        decision = Decision.SELECT_SECOND
    elif est.ci_hi < 0:
        decision = Decision.SELECT_FIRST
    else:
        decision = Decision.INCONCLUSIVE
    return ComparisonVerdict(decision, Basis.RELATIVE_SIGN, 1 - est.alpha)
