"""Objective Bayes factors for testing a Poisson model against a zero-inflated Poisson model."""

from .design import RegressionData, load_regression
from .errors import (
    AccuracyError,
    AllZerosError,
    DesignRankError,
    DomainError,
    InputError,
    IntegrabilityError,
    NumericalError,
    PreconditionError,
    ZipBfError,
)
from .exact_bf import (
    BfResult,
    CountSummary,
    log_bf_all_zeros,
    log_bf_gamma,
    log_bf_jeffreys,
    log_bf_l1,
    posterior_prob,
    summarize,
)
from .numerics import IntegrationConfig, LogEstimate
from .priors import PriorSpec, build_partial_prior, k_lambda
from .rank_deficient import RankDeficientResult, average_bfs, log_bf_rank_deficient
from .regression_bf import (
    IntegrabilityReport,
    check_integrability,
    divergence_profile,
    log_bf_regression,
    log_marginal_m0,
    log_marginal_m1,
)

__version__ = "0.1.0"

__all__ = [
    "RegressionData",
    "load_regression",
    "IntegrationConfig",
    "LogEstimate",
    "PriorSpec",
    "build_partial_prior",
    "k_lambda",
    "RankDeficientResult",
    "average_bfs",
    "log_bf_rank_deficient",
    "AccuracyError",
    "AllZerosError",
    "DesignRankError",
    "DomainError",
    "InputError",
    "IntegrabilityError",
    "NumericalError",
    "PreconditionError",
    "ZipBfError",
    "BfResult",
    "CountSummary",
    "log_bf_all_zeros",
    "log_bf_gamma",
    "log_bf_jeffreys",
    "log_bf_l1",
    "posterior_prob",
    "summarize",
    "IntegrabilityReport",
    "check_integrability",
    "divergence_profile",
    "log_bf_regression",
    "log_marginal_m0",
    "log_marginal_m1",
]
