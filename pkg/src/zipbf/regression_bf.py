"""Poisson regression (M0R) against ZIP regression (M1R) with a common inflation probability.

log(lam_i) = a0_i + a_i^T beta.  The beta prior is the Jeffreys prior of the
Poisson regression (j = 0) or its version restricted to positive-count rows
(j = 1); p ~ Uniform(0, 1).  Marginals are computed by tensor Gauss-Legendre
quadrature on a box in standardized coordinates (q <= 3) or by importance
sampling, and the p-integral by a Gauss-Legendre rule that is exact for the
degree-n polynomial in p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .design import RegressionData, load_regression
from .errors import DesignRankError, IntegrabilityError, NumericalError
from .exact_bf import BfResult, make_result
from .numerics import (
    IntegrationConfig,
    LogEstimate,
    Proposal,
    gauss_legendre_01,
    integrate_box,
    integrate_mc,
    nnls_feasible,
    poisson_mode,
    rank_and_basis,
)
from .priors import log_reg_jeffreys

__all__ = [
    "RegressionData",
    "load_regression",
    "IntegrabilityReport",
    "Frame",
    "check_integrability",
    "log_poisson_rows",
    "log_zero_inflation_factor",
    "log_marginal_m0",
    "log_marginal_m1",
    "log_bf_regression",
    "truncated_log_marginal_m1",
    "divergence_profile",
    "marginal",
]

DIVERGENCE_RADII = (5.0, 10.0, 20.0)
DIVERGENCE_GROWTH = math.log(10.0)


@dataclass(frozen=True)
class IntegrabilityReport:
    """Finiteness diagnostics for the two regression Jeffreys priors.

    ``zero_row_verdicts`` pairs each zero-count row (original index) with
    whether it is a nonnegative combination of the positive-count rows.
    """

    rank_A: int
    rank_A_plus: int
    q: int
    n: int
    k: int
    j0_condition_ok: bool
    zero_row_verdicts: tuple[tuple[int, bool], ...]
    j1_condition_ok: bool
    recommended_prior: str

    @property
    def j0_status(self) -> str:
        if self.j0_condition_ok:
            return "finite"
        return "unknown"

    def failing_rows(self) -> list[int]:
        return [row for row, ok in self.zero_row_verdicts if not ok]

    def lines(self) -> list[str]:
        out = [f"rank(A) = {self.rank_A}, rank(A+) = {self.rank_A_plus}, q = {self.q}"]
        out.append("j1: finite (positive-count rows have full rank)" if self.j1_condition_ok
                   else "j1: not usable (positive-count rows are rank deficient)")
        if self.j0_condition_ok:
            out.append("j0: finite (every zero-count row is a nonnegative combination of positive-count rows)")
        else:
            rows = ", ".join(str(r + 1) for r in self.failing_rows())
            out.append(f"j0: nonnegative-combination condition violated at row {rows}; marginal may be infinite")
        label = {"j1": "j1 prior", "partial": "partial prior (rank-deficient positive rows)",
                 "j0": "j0 prior", "none": "none"}[self.recommended_prior]
        out.append(f"recommended: {label}")
        return out

    def as_dict(self) -> dict:
        return {
            "rank_A": self.rank_A,
            "rank_A_plus": self.rank_A_plus,
            "q": self.q,
            "n": self.n,
            "k": self.k,
            "j0_condition_ok": self.j0_condition_ok,
            "j0_status": self.j0_status,
            "zero_row_verdicts": [{"row": r + 1, "nonnegative_combination": ok}
                                  for r, ok in self.zero_row_verdicts],
            "j1_condition_ok": self.j1_condition_ok,
            "recommended_prior": self.recommended_prior,
        }


def check_integrability(data: RegressionData) -> IntegrabilityReport:
    rank_A = rank_and_basis(data.A)[0]
    A_plus = data.A_plus
    rank_plus = rank_and_basis(A_plus)[0] if A_plus.shape[0] else 0
    verdicts = []
    for i in range(data.k):
        if A_plus.shape[0]:
            ok, _ = nnls_feasible(data.A[i], list(A_plus))
        else:
            ok = False
        verdicts.append((int(data.permutation[i]), ok))
    if rank_A < data.q:
        rec = "none"
    elif rank_plus == data.q:
        rec = "j1"
    else:
        rec = "partial"
    return IntegrabilityReport(
        rank_A=rank_A,
        rank_A_plus=rank_plus,
        q=data.q,
        n=data.n,
        k=data.k,
        j0_condition_ok=all(ok for _, ok in verdicts),
        zero_row_verdicts=tuple(verdicts),
        j1_condition_ok=rank_plus == data.q,
        recommended_prior=rec,
    )


# --------------------------------------------------------------------------
# likelihood pieces (all batched over beta with shape (N, q))
# --------------------------------------------------------------------------


def log_poisson_rows(beta, data: RegressionData, rows: slice) -> np.ndarray:
    """Sum over ``rows`` of log Poisson(x_i | lam_i)."""
    x = data.counts[rows].astype(float)
    eta = data.offsets[rows] + np.atleast_2d(beta) @ data.A[rows].T
    with np.errstate(over="ignore"):
        val = eta @ x - np.sum(np.exp(eta), axis=1)
    return val - float(np.sum(special.gammaln(x + 1.0)))


def log_zero_inflation_factor(beta, data: RegressionData) -> np.ndarray:
    """log of int_0^1 prod_{i<=k} {p + (1-p) e^-lam_i} (1-p)^(n-k) dp.

    The integrand is a polynomial of degree n in p, so ceil((n+1)/2)+1
    Gauss-Legendre nodes integrate it exactly.
    """
    n, k = data.n, data.k
    m = math.ceil((n + 1) / 2) + 1
    p, w = gauss_legendre_01(m)
    base = (n - k) * np.log1p(-p) + np.log(w)
    bb = np.atleast_2d(beta)
    if k == 0:
        return np.full(bb.shape[0], float(special.logsumexp(base)))
    eta = data.offsets[:k] + bb @ data.A[:k].T
    with np.errstate(over="ignore"):
        e = np.exp(-np.exp(eta))
    out = np.empty(bb.shape[0])
    step = max(1, 4_000_000 // (m * k))
    for s in range(0, bb.shape[0], step):
        es = e[s : s + step]
        terms = np.log(p[None, :, None] + (1.0 - p)[None, :, None] * es[:, None, :]).sum(axis=2)
        out[s : s + step] = special.logsumexp(terms + base[None, :], axis=1)
    return out


def _log_m0_integrand(data, log_prior):
    everything = slice(0, data.n)

    def f(beta):
        return log_poisson_rows(beta, data, everything) + log_prior(beta)

    return f


def _log_m1_integrand(data, log_prior):
    positive = slice(data.k, data.n)

    def f(beta):
        return (
            log_poisson_rows(beta, data, positive)
            + log_zero_inflation_factor(beta, data)
            + log_prior(beta)
        )

    return f


# --------------------------------------------------------------------------
# integration frame: centre and standardizing factor for box and proposal
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    loc: np.ndarray
    chol: np.ndarray
    notes: tuple[str, ...] = field(default_factory=tuple)


def _chol_of_inverse(H):
    H = 0.5 * (H + H.T)
    try:
        return np.linalg.cholesky(np.linalg.inv(H))
    except np.linalg.LinAlgError:
        return None


def _numerical_neg_hessian(f, x, steps):
    d = x.size
    pts = [x]
    for i in range(d):
        for j in range(i, d):
            for si in (1, -1):
                for sj in (1, -1):
                    y = x.copy()
                    y[i] += si * steps[i]
                    y[j] += sj * steps[j]
                    pts.append(y)
    vals = iter(f(np.array(pts)))
    next(vals)
    H = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            fpp, fpm, fmp, fmm = next(vals), next(vals), next(vals), next(vals)
            H[i, j] = H[j, i] = -(fpp - fpm - fmp + fmm) / (4.0 * steps[i] * steps[j])
    return H


def _start(data: RegressionData, positive_only: bool):
    try:
        return poisson_mode(data, positive_only)
    except (NumericalError, DesignRankError):
        pass
    x = data.counts.astype(float)
    beta = np.linalg.lstsq(data.A, np.log(x + 0.5) - data.offsets, rcond=None)[0]
    lam = np.exp(data.offsets + data.A @ beta)
    H = (data.A * lam[:, None]).T @ data.A
    return beta, H + 1e-8 * np.trace(H) * np.eye(data.q)


def _frame(data: RegressionData, log_f, positive_only: bool) -> Frame:
    """Centre at the integrand mode when it exists, else at the Poisson mode."""
    start, H0 = _start(data, positive_only)
    L0 = _chol_of_inverse(H0)
    if L0 is None:
        raise NumericalError("Poisson information at the starting point is not positive definite")
    notes = []

    def neg(b):
        v = float(log_f(b[None, :])[0])
        return -v if math.isfinite(v) else 1e300

    res = optimize.minimize(neg, start, method="BFGS")
    moved = np.linalg.solve(L0, res.x - start)
    if np.all(np.isfinite(res.x)) and res.fun < 1e300 and np.linalg.norm(moved) <= 20.0:
        steps = 1e-3 * np.sqrt(np.diag(L0 @ L0.T))
        L = _chol_of_inverse(_numerical_neg_hessian(log_f, res.x, steps))
        if L is not None:
            return Frame(res.x, L)
        notes.append("integrand curvature not positive definite at its mode; using Poisson curvature")
        return Frame(res.x, L0, tuple(notes))
    notes.append("integrand has no interior mode; frame centred at the Poisson mode")
    return Frame(start, L0, tuple(notes))


def marginal(log_f, frame: Frame, cfg: IntegrationConfig, radius: float | None = None):
    """Integrate exp(log_f) over R^q in the given frame; returns (LogEstimate, backend)."""
    q = frame.loc.size
    backend = cfg.resolve_backend(q)
    if backend == "quadrature":
        r = cfg.truncation_radius if radius is None else radius
        est = integrate_box(log_f, frame.loc, frame.chol, r)
    else:
        prop = Proposal(frame.loc, cfg.proposal_scale_inflation * frame.chol, cfg.proposal_df)
        est = integrate_mc(log_f, prop, cfg)
    if frame.notes:
        est = LogEstimate(est.log_value, est.rel_se, est.n_evals, est.warnings + frame.notes)
    return est, backend


# --------------------------------------------------------------------------
# marginals and Bayes factor
# --------------------------------------------------------------------------


def _require(data, j, force, report=None):
    report = report or check_integrability(data)
    notes = []
    if j == 1 and not report.j1_condition_ok:
        # the restricted prior vanishes identically; forcing cannot help
        raise IntegrabilityError(
            "j1 prior needs positive-count rows of full rank q; use the partial prior instead"
        )
    if j == 0 and not report.j0_condition_ok:
        rows = ", ".join(str(r + 1) for r in report.failing_rows())
        msg = f"nonnegative-combination condition fails at zero-count row(s) {rows}: the j0 marginal may be infinite"
        if not force:
            raise IntegrabilityError(msg)
        notes.append("divergence risk: " + msg + " (forced run)")
    return notes


def log_marginal_m0(data: RegressionData, j: int = 1, cfg: IntegrationConfig | None = None) -> LogEstimate:
    """log m0R(x): Poisson regression likelihood against the j-th Jeffreys prior."""
    cfg = cfg or IntegrationConfig()
    if j == 1 and not check_integrability(data).j1_condition_ok:
        raise IntegrabilityError("j1 prior needs positive-count rows of full rank q")
    f = _log_m0_integrand(data, lambda b: log_reg_jeffreys(b, data, j))
    est, _ = marginal(f, _frame(data, f, positive_only=(j == 1)), cfg)
    return est


def _m1_setup(data, j):
    f = _log_m1_integrand(data, lambda b: log_reg_jeffreys(b, data, j))
    return f, _frame(data, f, positive_only=(j == 1))


def _diagnostic_frame(data: RegressionData) -> Frame:
    # fixed by the positive-count likelihood alone, so a divergent prior
    # cannot drag the box along with it
    start, H = _start(data, positive_only=True)
    L = _chol_of_inverse(H)
    if L is None:
        raise NumericalError("Poisson information is not positive definite")
    return Frame(start, L)


def truncated_log_marginal_m1(data: RegressionData, j: int, radius: float) -> LogEstimate:
    """m1R by quadrature over a box of the given radius, in units standardized
    by the positive-count Poisson mode and curvature."""
    f = _log_m1_integrand(data, lambda b: log_reg_jeffreys(b, data, j))
    frame = _diagnostic_frame(data)
    return integrate_box(f, frame.loc, frame.chol, radius)


def divergence_profile(data: RegressionData, j: int, radii=DIVERGENCE_RADII):
    """Truncated log m1R at nested radii, and whether it keeps growing by more than 10x."""
    logs = [truncated_log_marginal_m1(data, j, r).log_value for r in radii]
    steps = np.diff(logs)
    diverging = bool(np.all(steps > 0) and steps[-1] > DIVERGENCE_GROWTH)
    return logs, diverging


def log_marginal_m1(data: RegressionData, j: int = 1, cfg: IntegrationConfig | None = None,
                    force: bool = False) -> LogEstimate:
    """log m1R(x): ZIP regression likelihood, j-th Jeffreys prior on beta, p ~ U(0, 1).

    Unless ``force`` is set the integrability check must approve the prior.
    Forced runs carry a divergence warning and, for q <= 3, the outcome of the
    nested-radius divergence diagnostic.
    """
    cfg = cfg or IntegrationConfig()
    notes = _require(data, j, force)
    f, frame = _m1_setup(data, j)
    est, _ = marginal(f, frame, cfg)
    if notes and data.q <= 3:
        logs, diverging = divergence_profile(data, j)
        growth = ", ".join(f"{v:.4g}" for v in logs)
        if diverging:
            notes.append(f"divergence diagnostic fired: truncated log m1 at radii 5/10/20 = {growth}")
            est = LogEstimate(math.inf, est.rel_se, est.n_evals, est.warnings)
        else:
            notes.append(f"divergence diagnostic quiet: truncated log m1 at radii 5/10/20 = {growth}")
    return LogEstimate(est.log_value, est.rel_se, est.n_evals, est.warnings + tuple(notes))


def log_bf_regression(data: RegressionData, j: int = 1, cfg: IntegrationConfig | None = None,
                      prior_odds: float = 1.0, force: bool = False) -> BfResult:
    """Bayes factor of ZIP regression to Poisson regression under the j-th prior pair."""
    cfg = cfg or IntegrationConfig()
    m1 = log_marginal_m1(data, j, cfg, force)
    m0 = log_marginal_m0(data, j, cfg)
    method = ("regression_quadrature" if cfg.resolve_backend(data.q) == "quadrature"
              else "regression_mc")
    warnings = tuple(dict.fromkeys(m1.warnings + m0.warnings))
    return make_result(m1.log_value - m0.log_value, method, prior_odds,
                       math.hypot(m1.rel_se, m0.rel_se), warnings)
