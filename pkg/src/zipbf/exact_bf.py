"""Bayes factors of the Poisson model (M0) against the ZIP model (M1) without covariates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import AllZerosError, DomainError, InputError
from .numerics import IntegrationConfig, integrate_1d, log_sum_exp
from .priors import k_lambda

__all__ = [
    "CountSummary",
    "BfResult",
    "summarize",
    "posterior_prob",
    "make_result",
    "log_bf_jeffreys",
    "log_bf_gamma",
    "log_bf_all_zeros",
    "log_bf_l1",
]

METHODS = (
    "closed_form",
    "quadrature_l1",
    "gamma_closed_form",
    "all_zeros",
    "regression_quadrature",
    "regression_mc",
    "rank_deficient",
)


@dataclass(frozen=True)
class CountSummary:
    """Sufficient statistics of a count sample."""

    n: int
    k: int
    s: int
    log_factorial_product: float = 0.0

    def __post_init__(self):
        if self.n < 1 or not 0 <= self.k <= self.n or self.s < 0:
            raise InputError(f"invalid summary n={self.n}, k={self.k}, s={self.s}")
        if (self.s == 0) != (self.k == self.n):
            raise InputError("s = 0 must coincide with k = n")
        if self.s < self.n - self.k:
            raise InputError("total count is smaller than the number of positive counts")


@dataclass(frozen=True)
class BfResult:
    """Bayes factor of M1 to M0 with the derived posterior probability of M1."""

    log_bf10: float
    bf10: float
    post_prob_m1: float
    prior_odds: float
    method: str
    rel_se: float = 0.0
    warnings: tuple[str, ...] = field(default_factory=tuple)


def summarize(counts) -> CountSummary:
    arr = np.asarray(list(counts) if not isinstance(counts, np.ndarray) else counts)
    if arr.size == 0:
        raise InputError("no counts given")
    f = arr.astype(float)
    if np.any(f < 0) or np.any(f != np.round(f)):
        raise InputError("counts must be nonnegative integers")
    return CountSummary(
        n=int(arr.size),
        k=int(np.sum(f == 0)),
        s=int(np.sum(f)),
        log_factorial_product=float(np.sum(special.gammaln(f + 1.0))),
    )


def posterior_prob(log_bf10: float, prior_odds: float = 1.0) -> float:
    """Pr(M1 | x) = 1 - [1 + B10 * Pr(M1)/Pr(M0)]^-1."""
    if not prior_odds > 0:
        raise DomainError("prior odds must be positive")
    return float(special.expit(log_bf10 + math.log(prior_odds)))


def make_result(log_bf10, method, prior_odds=1.0, rel_se=0.0, warnings=()) -> BfResult:
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}")
    lb = float(log_bf10)
    with np.errstate(over="ignore"):
        bf = float(np.exp(lb))
    return BfResult(
        log_bf10=lb,
        bf10=bf,
        post_prob_m1=posterior_prob(lb, prior_odds),
        prior_odds=float(prior_odds),
        method=method,
        rel_se=float(rel_se),
        warnings=tuple(warnings),
    )


def _log_binomial_weights(n: int, k: int) -> np.ndarray:
    # log of k!(n-j)! / ((k-j)!(n+1)!) for j = 0..k
    j = np.arange(k + 1, dtype=float)
    return (
        special.gammaln(k + 1.0)
        - special.gammaln(n + 2.0)
        + special.gammaln(n - j + 1.0)
        - special.gammaln(k - j + 1.0)
    )


def log_bf_jeffreys(summary: CountSummary, prior_odds: float = 1.0) -> BfResult:
    """Closed-form Bayes factor under pi(lam) = lam^-1/2 and p ~ U(0, 1)."""
    n, k, s = summary.n, summary.k, summary.s
    if s == 0:
        raise AllZerosError("all counts are zero: the ZIP marginal is infinite; use log_bf_all_zeros")
    j = np.arange(k + 1, dtype=float)
    terms = _log_binomial_weights(n, k) - (s + 0.5) * np.log1p(-j / n)
    return make_result(log_sum_exp(terms), "closed_form", prior_odds)


def log_bf_gamma(summary: CountSummary, a: float, b: float, prior_odds: float = 1.0) -> BfResult:
    """Closed-form Bayes factor under a Gamma(a, b) prior on lam shared by both models.

    ``b = 0`` is the improper limit and needs at least one positive count.
    """
    if not a > 0 or not b >= 0:
        raise DomainError("gamma prior needs a > 0 and b >= 0")
    n, k, s = summary.n, summary.k, summary.s
    if s == 0 and b == 0:
        raise AllZerosError("b = 0 with all-zero counts gives an infinite ZIP marginal")
    j = np.arange(k + 1, dtype=float)
    terms = _log_binomial_weights(n, k) - (s + a) * np.log1p(-j / (n + b))
    return make_result(log_sum_exp(terms), "gamma_closed_form", prior_odds)


def log_bf_all_zeros(n: int, a: float = 1.0, b: float = 1.0, prior_odds: float = 1.0) -> BfResult:
    """Bayes factor for an all-zero sample under a proper Gamma(a, b) prior.

    B10(0) = (n+b)^a / (n+1) * sum_{j=0}^{n} (j+b)^-a; with a = b = 1 this is
    the harmonic number H_{n+1}.
    """
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    if not a > 0 or not b > 0:
        raise DomainError("all-zero data need a proper prior: a > 0 and b > 0")
    j = np.arange(int(n) + 1, dtype=float)
    lb = a * math.log(n + b) - math.log(n + 1.0) + log_sum_exp(-a * np.log(j + b))
    return make_result(lb, "all_zeros", prior_odds)


def log_bf_l1(
    summary: CountSummary,
    prior_odds: float = 1.0,
    cfg: IntegrationConfig | None = None,
    k_fn=k_lambda,
) -> BfResult:
    """Bayes factor under the truncated-Poisson Jeffreys prior k(lam)/sqrt(lam).

    The p-integrals are Beta functions; each lam-integral
    int exp(-(n-j) lam) lam^(s-1/2) k(lam) dlam is done by quadrature.
    ``k_fn`` is exposed so tests can substitute k = 1.
    """
    n, k, s = summary.n, summary.k, summary.s
    if s == 0:
        raise AllZerosError("all counts are zero: the ZIP marginal is infinite; use log_bf_all_zeros")
    cfg = cfg or IntegrationConfig()

    def lam_integral(rate):
        est = integrate_1d(
            lambda lam: -rate * lam + (s - 0.5) * np.log(lam) + np.log(k_fn(lam)), cfg
        )
        return est.log_value

    log_m0 = lam_integral(float(n))
    weights = _log_binomial_weights(n, k)
    terms = [w + lam_integral(float(n - j)) for j, w in enumerate(weights)]
    return make_result(log_sum_exp(terms) - log_m0, "quadrature_l1", prior_odds)
