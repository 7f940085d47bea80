"""Prior densities for the Poisson and zero-inflated Poisson parameters.

All densities are returned on the log scale.  Improper densities are
unnormalized; only ratios of marginals built from the same prior are
meaningful.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .design import RegressionData
from .errors import DesignRankError, DomainError, PreconditionError
from .numerics import rank_and_basis

__all__ = [
    "PriorSpec",
    "PartialPriorSpec",
    "k_lambda",
    "log_prior_lambda",
    "log_gamma_prior",
    "log_det_weighted_gram",
    "log_reg_jeffreys",
    "build_partial_prior",
    "log_partial_prior",
    "log_partial_prior_beta",
]

SPAN_TOL = 1e-10
_SUBSET_LIMIT = 512


@dataclass(frozen=True)
class PriorSpec:
    """Which prior family governs lambda (or beta in regression).

    family is one of ``jeffreys`` (variant ``l``), ``gamma`` (``a``, ``b``),
    ``reg_jeffreys`` (variant ``j``) or ``partial_jeffreys``.  The prior on the
    inflation probability is always Uniform(0, 1].
    """

    family: str
    l: int = 0
    a: float | None = None
    b: float | None = None
    j: int = 1

    def __post_init__(self):
        if self.family not in ("jeffreys", "gamma", "reg_jeffreys", "partial_jeffreys"):
            raise DomainError(f"unknown prior family {self.family!r}")
        if self.family == "jeffreys" and self.l not in (0, 1):
            raise DomainError("jeffreys variant l must be 0 or 1")
        if self.family == "reg_jeffreys" and self.j not in (0, 1):
            raise DomainError("regression jeffreys variant j must be 0 or 1")
        if self.family == "gamma":
            if self.a is None or self.b is None or not self.a > 0 or not self.b >= 0:
                raise DomainError("gamma prior needs a > 0 and b >= 0")

    @classmethod
    def parse(cls, text: str) -> "PriorSpec":
        """Parse the command-line form: jeffreys0, jeffreys1, gamma:a,b, j0, j1, partial."""
        t = text.strip().lower()
        if t in ("jeffreys0", "jeffreys1"):
            return cls("jeffreys", l=int(t[-1]))
        if t in ("j0", "j1"):
            return cls("reg_jeffreys", j=int(t[-1]))
        if t == "partial":
            return cls("partial_jeffreys")
        if t.startswith("gamma:"):
            try:
                a, b = (float(v) for v in t[6:].split(","))
            except ValueError:
                raise DomainError(f"cannot parse gamma prior {text!r}; expected gamma:a,b") from None
            return cls("gamma", a=a, b=b)
        raise DomainError(f"unknown prior {text!r}")

    def label(self) -> str:
        if self.family == "jeffreys":
            return f"jeffreys{self.l}"
        if self.family == "reg_jeffreys":
            return f"j{self.j}"
        if self.family == "gamma":
            return f"gamma:{self.a:g},{self.b:g}"
        return "partial"


# --------------------------------------------------------------------------
# non-regression priors on lambda
# --------------------------------------------------------------------------


def _check_positive(lam):
    arr = np.asarray(lam, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("lambda must be positive")
    return arr


def _excess_exp(lam):
    # e^lam - 1 - lam for lam <= 1 without cancellation against lam
    return np.expm1(lam) - lam


def k_lambda(lam):
    """Ratio of the truncated-Poisson to the Poisson Jeffreys density.

    k(lam) = sqrt(1 - (lam + 1) e^-lam) / (1 - e^-lam), increasing from
    1/sqrt(2) at 0+ to 1 as lam grows.
    """
    arr = _check_positive(lam)
    out = np.empty_like(arr)
    tiny = arr < 1e-4
    mid = (arr >= 1e-4) & (arr <= 1.0)
    big = arr > 1.0
    # k^2 = 1/2 + lam/6 + O(lam^3) (the lam^2 coefficient vanishes)
    out[tiny] = np.sqrt(0.5 + arr[tiny] / 6.0)
    lm = arr[mid]
    num = np.exp(-lm) * _excess_exp(lm)
    out[mid] = np.sqrt(num) / -np.expm1(-lm)
    lb = arr[big]
    num = -np.expm1(-lb) - lb * np.exp(-lb)
    out[big] = np.sqrt(num) / -np.expm1(-lb)
    return float(out) if out.ndim == 0 else out


def log_prior_lambda(lam, l: int = 0):
    """log of k(lam)^l / sqrt(lam)."""
    if l not in (0, 1):
        raise DomainError("l must be 0 or 1")
    arr = _check_positive(lam)
    out = -0.5 * np.log(arr)
    if l == 1:
        out = out + np.log(k_lambda(arr))
    return float(out) if np.ndim(out) == 0 else out


def log_gamma_prior(lam, a: float, b: float):
    """log density of Gamma(shape a, rate b) at lam."""
    if not a > 0 or not b > 0:
        raise DomainError("gamma prior needs a > 0 and b > 0")
    arr = _check_positive(lam)
    out = a * math.log(b) - b * arr + (a - 1.0) * np.log(arr) - special.gammaln(a)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# regression Jeffreys priors
# --------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _subset_table(key):
    X = np.frombuffer(key[0], dtype=float).reshape(key[1])
    m, d = X.shape
    scale = np.prod(np.sort(np.linalg.norm(X, axis=1))[::-1][:d]) if m >= d else 0.0
    idx, logdet2 = [], []
    for S in itertools.combinations(range(m), d):
        det = np.linalg.det(X[list(S)])
        if abs(det) > 1e-12 * max(scale, 1e-300):
            idx.append(S)
            logdet2.append(2.0 * math.log(abs(det)))
    return np.array(idx, dtype=np.int64).reshape(-1, d), np.array(logdet2)


def log_det_weighted_gram(eta, X, method: str = "auto"):
    """log det( sum_i exp(eta_i) x_i x_i^T ) for a batch of weight vectors.

    eta has shape (N, m) or (m,); X has shape (m, d).  ``method="subsets"``
    sums the nonnegative q-subset expansion in log space, which keeps full
    relative accuracy when the weights span many orders of magnitude;
    ``method="gram"`` factorizes the max-shifted Gram matrix.  ``auto`` uses
    subsets when there are at most 512 of them.  Singular matrices give -inf.
    """
    X = np.asarray(X, dtype=float)
    eta = np.asarray(eta, dtype=float)
    single = eta.ndim == 1
    eta = np.atleast_2d(eta)
    m, d = X.shape
    if d == 0:
        out = np.zeros(eta.shape[0])
        return float(out[0]) if single else out
    if m < d:
        out = np.full(eta.shape[0], -np.inf)
        return float(out[0]) if single else out
    if method == "auto":
        method = "subsets" if math.comb(m, d) <= _SUBSET_LIMIT else "gram"
    if method == "subsets":
        idx, logdet2 = _subset_table((np.ascontiguousarray(X).tobytes(), X.shape))
        if idx.shape[0] == 0:
            out = np.full(eta.shape[0], -np.inf)
        else:
            terms = eta[:, idx].sum(axis=2) + logdet2[None, :]
            out = special.logsumexp(terms, axis=1)
    elif method == "gram":
        top = np.max(eta, axis=1, keepdims=True)
        w = np.exp(eta - top)
        G = np.einsum("ni,ij,ik->njk", w, X, X)
        sign, logdet = np.linalg.slogdet(G)
        out = np.where(sign > 0, logdet + d * top[:, 0], -np.inf)
    else:
        raise DomainError(f"unknown method {method!r}")
    return float(out[0]) if single else out


def log_reg_jeffreys(beta, data: RegressionData, j: int = 1, method: str = "auto"):
    """log of |sum lam_i a_i a_i^T|^(1/2), over all rows (j=0) or positive-count rows (j=1).

    ``beta`` may be a single q-vector or an (N, q) batch.
    """
    if j not in (0, 1):
        raise DomainError("j must be 0 or 1")
    b = np.asarray(beta, dtype=float)
    rows = slice(0, data.n) if j == 0 else slice(data.k, data.n)
    A = data.A[rows]
    eta = data.offsets[rows] + np.atleast_2d(b) @ A.T
    out = 0.5 * log_det_weighted_gram(eta, A, method)
    return float(out[0]) if b.ndim == 1 else out


# --------------------------------------------------------------------------
# partial Jeffreys prior for rank-deficient positive-count designs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PartialPriorSpec:
    """Reparameterization used by the partial Jeffreys prior.

    Indices refer to rows of the zero-first ``RegressionData``.  ``C`` is the
    (n-k) x t matrix with A_plus = C @ A[j_set]; ``B`` holds orthonormal
    columns spanning the rows in ``l_set`` and ``d[w, h] = B[:, h] . a_{l_w}``.
    """

    t: int
    j_set: tuple[int, ...]
    l_set: tuple[int, ...]
    r: int
    in_span: tuple[int, ...]
    C: np.ndarray
    B: np.ndarray
    d: np.ndarray

    @property
    def deficiency(self) -> int:
        return len(self.l_set)


def _in_span(vec, basis) -> bool:
    if basis.shape[1] == 0:
        return bool(np.linalg.norm(vec) == 0.0)
    resid = vec - basis @ (basis.T @ vec)
    return bool(np.linalg.norm(resid) <= SPAN_TOL * max(np.linalg.norm(vec), 1e-300))


def _greedy(rows, candidates, start, target):
    chosen = list(start)
    for i in candidates:
        if len(chosen) - len(start) == target:
            break
        trial = chosen + [i]
        if rank_and_basis(rows[trial])[0] == len(trial):
            chosen.append(i)
    return chosen[len(start):]


def build_partial_prior(data: RegressionData, j_set=None, l_set=None) -> PartialPriorSpec:
    """Deterministic construction of the partial Jeffreys reparameterization.

    Defaults pick the lexicographically first positive-count rows spanning the
    positive-row space, then the lexicographically first zero-count rows
    outside that space completing a basis of R^q.
    """
    A, k, q = data.A, data.k, data.q
    if rank_and_basis(A)[0] < q:
        raise DesignRankError("design matrix must have rank q")
    A_plus = A[k:]
    t, _ = rank_and_basis(A_plus) if A_plus.shape[0] else (0, None)
    if t == q:
        raise PreconditionError("positive-count rows have full rank; use the standard regression prior")
    positive = list(range(k, data.n))
    if j_set is None:
        j_set = _greedy(A, positive, [], t)
    j_set = tuple(int(i) for i in j_set)
    if len(j_set) != t or any(i < k for i in j_set) or (t and rank_and_basis(A[list(j_set)])[0] != t):
        raise PreconditionError(f"j_set must be {t} independent positive-count rows")

    Vbasis = rank_and_basis(A_plus.T)[1] if t else np.zeros((q, 0))
    in_span = tuple(i for i in range(k) if _in_span(A[i], Vbasis))
    outside = [i for i in range(k) if i not in in_span]
    if l_set is None:
        l_set = _greedy(A, outside, list(j_set), q - t)
    l_set = tuple(int(i) for i in l_set)
    if len(l_set) != q - t or any(i not in outside for i in l_set):
        raise PreconditionError(f"l_set must be {q - t} zero-count rows outside the positive-row span")
    if rank_and_basis(A[list(j_set) + list(l_set)])[0] != q:
        raise PreconditionError("selected rows do not form a basis; numerical rank trouble")

    J = A[list(j_set)].T  # q x t
    if t:
        C = np.linalg.lstsq(J, A_plus.T, rcond=None)[0].T
        err = np.max(np.abs(C @ J.T - A_plus)) if A_plus.size else 0.0
        if err > 1e-10 * max(1.0, np.max(np.abs(A_plus))):
            raise PreconditionError("positive rows are not reproduced by the chosen j_set")
    else:
        C = np.zeros((A_plus.shape[0], 0))
    L = A[list(l_set)]
    B, R = np.linalg.qr(L.T)
    # orient so each xi_w increases with lambda_{l_w} (Gram-Schmidt order)
    B = B * np.where(np.diag(R) < 0, -1.0, 1.0)
    d = L @ B
    return PartialPriorSpec(
        t=int(t), j_set=j_set, l_set=l_set, r=len(in_span), in_span=in_span, C=C, B=B, d=d
    )


def _log_pj_eta(eta_j, spec: PartialPriorSpec, data: RegressionData):
    # eta_j: (N, t) log lambdas of the j_set rows
    k = data.k
    a0j = data.offsets[list(spec.j_set)]
    eta_plus = data.offsets[k:] + (eta_j - a0j) @ spec.C.T
    return -np.sum(eta_j, axis=1) + 0.5 * log_det_weighted_gram(eta_plus, spec.C)


def _log_prop_eta(eta_l, spec: PartialPriorSpec, data: RegressionData):
    # eta_l: (N, q-t) log lambdas of the l_set rows; xi_h ~ Exp(1)
    a0l = data.offsets[list(spec.l_set)]
    zeta = np.linalg.solve(spec.d, (eta_l - a0l).T).T
    log_det_d = float(np.linalg.slogdet(spec.d)[1])
    return np.sum(zeta - np.exp(zeta), axis=1) - log_det_d - np.sum(eta_l, axis=1)


def log_partial_prior(lam_j, lam_l, spec: PartialPriorSpec, data: RegressionData):
    """log of pi_PJ(lam_j) * pi_prop(lam_l) in lambda coordinates.

    Accepts single points (1-D arrays) or batches with a leading axis.
    """
    lj = np.asarray(lam_j, dtype=float)
    ll = np.asarray(lam_l, dtype=float)
    if np.any(~(lj > 0)) or np.any(~(ll > 0)):
        raise DomainError("all lambda values must be positive")
    single = ll.ndim == 1
    ej = np.log(lj).reshape(-1, spec.t)
    el = np.log(ll).reshape(-1, spec.deficiency)
    out = _log_pj_eta(ej, spec, data) + _log_prop_eta(el, spec, data)
    return float(out[0]) if single else out


def log_partial_prior_beta(beta, spec: PartialPriorSpec, data: RegressionData):
    """The partial prior as a density on beta (Jacobian of beta -> lambdas included)."""
    b = np.asarray(beta, dtype=float)
    bb = np.atleast_2d(b)
    rows = list(spec.j_set) + list(spec.l_set)
    M = data.A[rows]
    eta = data.offsets[rows] + bb @ M.T
    ej, el = eta[:, : spec.t], eta[:, spec.t :]
    out = (
        _log_pj_eta(ej, spec, data)
        + _log_prop_eta(el, spec, data)
        + np.sum(eta, axis=1)
        + float(np.linalg.slogdet(M)[1])
    )
    return float(out[0]) if b.ndim == 1 else out
