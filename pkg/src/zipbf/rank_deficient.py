"""Bayes factors when the positive-count rows do not span R^q.

The beta prior is the partial Jeffreys prior: Jeffreys-type on the t
directions identified by positive counts, Exp(1)-induced on the remaining
q - t directions, which are tied to a selection of zero-count rows (the
``l_set``).  Both models use the same prior so the improper constant cancels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .design import RegressionData
from .errors import PreconditionError
from .exact_bf import BfResult, make_result
from .numerics import IntegrationConfig, rank_and_basis
from .priors import PartialPriorSpec, build_partial_prior, log_partial_prior_beta
from .regression_bf import _frame, _log_m0_integrand, _log_m1_integrand, marginal

__all__ = ["Selection", "RankDeficientResult", "log_bf_rank_deficient", "average_bfs", "candidate_l_sets"]

MAX_SELECTIONS = 64


@dataclass(frozen=True)
class Selection:
    """Bayes factor for one choice of zero-count rows carrying the proper prior part.

    ``l_set`` holds original (input-order, 0-based) row indices.
    """

    l_set: tuple[int, ...]
    log_bf10: float
    rel_se: float
    log_m0: float
    log_m1: float
    warnings: tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class RankDeficientResult:
    selections: tuple[Selection, ...]
    arithmetic_mean_bf: float
    geometric_mean_bf: float
    t: int
    r: int
    deficiency: int
    backend: str
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def default(self, prior_odds: float = 1.0) -> BfResult:
        """The first (deterministic default) selection as a BfResult."""
        s = self.selections[0]
        return make_result(s.log_bf10, "rank_deficient", prior_odds, s.rel_se,
                           self.warnings + s.warnings)


def average_bfs(log_bfs) -> tuple[float, float, tuple[str, ...]]:
    """Arithmetic and geometric means of Bayes factors given on the log scale.

    Non-finite entries are dropped with a warning.
    """
    vals = np.asarray(list(log_bfs), dtype=float)
    keep = np.isfinite(vals)
    notes = ()
    if not np.all(keep):
        notes = (f"{int(np.sum(~keep))} non-finite Bayes factor(s) excluded from the averages",)
    vals = vals[keep]
    if vals.size == 0:
        raise PreconditionError("no finite Bayes factors to average")
    arith = math.exp(special.logsumexp(vals) - math.log(vals.size))
    geom = math.exp(float(np.mean(vals)))
    return arith, geom, notes


def candidate_l_sets(data: RegressionData, spec: PartialPriorSpec) -> list[tuple[int, ...]]:
    """All single zero-count rows outside the positive-row span (deficiency 1)."""
    if spec.deficiency != 1:
        raise PreconditionError("selection enumeration is defined for rank deficiency 1 only")
    return [(i,) for i in range(data.k) if i not in spec.in_span]


def _one(data, spec, cfg):
    log_prior = lambda b: log_partial_prior_beta(b, spec, data)  # noqa: E731
    f1 = _log_m1_integrand(data, log_prior)
    f0 = _log_m0_integrand(data, log_prior)
    m1, backend = marginal(f1, _frame(data, f1, positive_only=False), cfg)
    m0, _ = marginal(f0, _frame(data, f0, positive_only=False), cfg)
    sel = Selection(
        l_set=tuple(int(data.permutation[i]) for i in spec.l_set),
        log_bf10=m1.log_value - m0.log_value,
        rel_se=math.hypot(m1.rel_se, m0.rel_se),
        log_m0=m0.log_value,
        log_m1=m1.log_value,
        warnings=tuple(dict.fromkeys(m1.warnings + m0.warnings)),
    )
    return sel, backend


def log_bf_rank_deficient(data: RegressionData, cfg: IntegrationConfig | None = None,
                          enumerate_all: bool = False) -> RankDeficientResult:
    """Bayes factor(s) under the partial Jeffreys prior.

    With ``enumerate_all`` every admissible single-row selection is evaluated
    (deficiency 1 only, capped at 64); otherwise only the deterministic default.
    """
    cfg = cfg or IntegrationConfig()
    A_plus = data.A_plus
    t = rank_and_basis(A_plus)[0] if A_plus.shape[0] else 0
    if t == data.q:
        raise PreconditionError("positive-count rows have full rank; use log_bf_regression")
    base = build_partial_prior(data)
    notes = []
    if enumerate_all:
        l_sets = candidate_l_sets(data, base)
        if len(l_sets) > MAX_SELECTIONS:
            notes.append(f"{len(l_sets)} selections available; only the first {MAX_SELECTIONS} evaluated")
            l_sets = l_sets[:MAX_SELECTIONS]
    else:
        l_sets = [base.l_set]
    selections, backend = [], ""
    for ls in l_sets:
        spec = base if ls == base.l_set else build_partial_prior(data, j_set=base.j_set, l_set=ls)
        sel, backend = _one(data, spec, cfg)
        if not math.isfinite(sel.log_bf10):
            notes.append(f"selection {[i + 1 for i in sel.l_set]} gave a non-finite Bayes factor")
        selections.append(sel)
    arith, geom, avg_notes = average_bfs(s.log_bf10 for s in selections)
    return RankDeficientResult(
        selections=tuple(selections),
        arithmetic_mean_bf=arith,
        geometric_mean_bf=geom,
        t=int(t),
        r=base.r,
        deficiency=data.q - int(t),
        backend=backend,
        warnings=tuple(notes) + avg_notes,
    )
