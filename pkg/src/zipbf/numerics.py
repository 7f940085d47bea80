"""Numerical kernels: special functions, log-space reductions, quadrature,
seeded importance sampling and small dense linear algebra.

Everything that produces a probability-scale quantity returns its logarithm.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, optimize, special

from .errors import AccuracyError, DesignRankError, DomainError, NumericalError

__all__ = [
    "IntegrationConfig",
    "LogEstimate",
    "Proposal",
    "log_gamma",
    "log_sum_exp",
    "integrate_1d",
    "integrate_mc",
    "integrate_box",
    "box_rule",
    "gauss_legendre_01",
    "nnls_feasible",
    "rank_and_basis",
    "poisson_mode",
]

BACKENDS = ("auto", "quadrature", "importance_sampling")
MAX_QUAD_DIM = 3
CHUNK_SIZE = 4096


@dataclass(frozen=True)
class IntegrationConfig:
    """Settings for marginal-likelihood integration.

    ``backend="auto"`` picks tensor quadrature when the integration dimension
    is at most 3 and importance sampling otherwise.
    """

    backend: str = "auto"
    mc_samples: int = 65536
    target_rel_se: float = 0.02
    seed: int = 0
    quad_rel_tol: float = 1e-9
    truncation_radius: float = 30.0
    proposal_df: float = 5.0
    proposal_scale_inflation: float = 1.2
    workers: int = 1

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise DomainError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if self.mc_samples < 1024:
            raise DomainError("mc_samples must be at least 1024")
        if not 0.0 < self.target_rel_se < 1.0:
            raise DomainError("target_rel_se must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.quad_rel_tol <= 0:
            raise DomainError("quad_rel_tol must be positive")
        if self.truncation_radius <= 0:
            raise DomainError("truncation_radius must be positive")
        if self.proposal_df <= 0:
            raise DomainError("proposal_df must be positive")
        if self.proposal_scale_inflation < 1.0:
            raise DomainError("proposal_scale_inflation must be >= 1")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")

    def resolve_backend(self, dim: int) -> str:
        if self.backend == "auto":
            return "quadrature" if dim <= MAX_QUAD_DIM else "importance_sampling"
        if self.backend == "quadrature" and dim > MAX_QUAD_DIM:
            raise DomainError(
                f"quadrature backend supports at most {MAX_QUAD_DIM} dimensions, got {dim}"
            )
        return self.backend


@dataclass(frozen=True)
class LogEstimate:
    """Log of an integral together with its relative standard error."""

    log_value: float
    rel_se: float = 0.0
    n_evals: int = 0
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def divergent(self) -> bool:
        return self.log_value == math.inf


# --------------------------------------------------------------------------
# special functions and reductions
# --------------------------------------------------------------------------


def log_gamma(x):
    """ln Gamma(x) for x > 0 (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("log_gamma requires x > 0")
    out = special.gammaln(arr)
    return float(out) if out.ndim == 0 else out


def log_sum_exp(terms) -> float:
    """ln(sum(exp(terms))) without overflow; -inf entries are neutral."""
    arr = np.asarray(terms, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError("log_sum_exp of an empty sequence")
    return float(special.logsumexp(arr))


# --------------------------------------------------------------------------
# one-dimensional quadrature on (0, inf)
# --------------------------------------------------------------------------

_PROBE = np.logspace(-12, 12, 481)


def integrate_1d(log_f, cfg: IntegrationConfig | None = None) -> LogEstimate:
    """Log of the integral of exp(log_f) over (0, inf).

    The half line is mapped onto (0, 1) by lam = c*t/(1-t), with c placed at
    the peak of lam*f(lam) so the bulk of the mass sits near t = 1/2, then
    integrated with adaptive Gauss-Kronrod (QUADPACK).  ``log_f`` must accept
    numpy arrays.
    """
    cfg = cfg or IntegrationConfig()
    with np.errstate(all="ignore"):
        probe = np.asarray(log_f(_PROBE), dtype=float) + np.log(_PROBE)
    probe = np.where(np.isnan(probe), -np.inf, probe)
    if not np.any(np.isfinite(probe)):
        return LogEstimate(-math.inf, 0.0, _PROBE.size, ("integrand vanished on the probe grid",))
    i = int(np.argmax(probe))
    c = float(_PROBE[i])
    shift = float(probe[i])

    def g(t):
        if t <= 0.0 or t >= 1.0:
            return 0.0
        lam = c * t / (1.0 - t)
        if lam <= 0.0 or not math.isfinite(lam):
            return 0.0
        with np.errstate(all="ignore"):
            v = float(log_f(lam)) - shift
        if not v > -745.0:
            return 0.0
        return math.exp(v) * c / (1.0 - t) ** 2

    val, err, info, *rest = integrate.quad(
        g, 0.0, 1.0, epsabs=0.0, epsrel=cfg.quad_rel_tol, limit=500, points=(0.5,), full_output=1
    )
    n_evals = int(info["neval"]) + _PROBE.size
    if val <= 0.0:
        return LogEstimate(-math.inf, 0.0, n_evals, ("integral underflowed to zero",))
    est = LogEstimate(shift + math.log(val), 0.0, n_evals)
    if rest and err > 10.0 * cfg.quad_rel_tol * abs(val):
        raise AccuracyError(f"quadrature did not converge: {rest[0]}", best=est)
    return est


# --------------------------------------------------------------------------
# tensor Gauss-Legendre quadrature on a standardized box
# --------------------------------------------------------------------------

_NODES_PER_PANEL = {1: 20, 2: 10, 3: 6}


def gauss_legendre_01(m: int) -> tuple[np.ndarray, np.ndarray]:
    """m-point Gauss-Legendre nodes and weights on (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _panel_edges(radius: float) -> np.ndarray:
    edges = [0.0]
    x = 0.0
    while x < radius:
        width = 0.5 if x < 4.0 else (1.0 if x < 8.0 else 0.4 * x)
        x = min(x + width, radius)
        edges.append(x)
    pos = np.array(edges)
    return np.concatenate([-pos[:0:-1], pos])


def box_rule(dim: int, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Composite tensor Gauss-Legendre rule on [-radius, radius]^dim.

    Panels are narrow near the origin and widen geometrically outwards.
    Returns (nodes with shape (N, dim), log weights with shape (N,)).
    """
    if dim > MAX_QUAD_DIM:
        raise DomainError(f"box_rule supports at most {MAX_QUAD_DIM} dimensions")
    m = _NODES_PER_PANEL[dim]
    gx, gw = np.polynomial.legendre.leggauss(m)
    edges = _panel_edges(radius)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = ((lo + hi)[:, None] * 0.5 + half[:, None] * gx[None, :]).ravel()
    logw = np.log((half[:, None] * gw[None, :]).ravel())
    grids = np.meshgrid(*([nodes] * dim), indexing="ij")
    wgrids = np.meshgrid(*([logw] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    lw = np.sum(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return pts, lw


def integrate_box(log_f, loc, chol, radius: float, chunk: int = 20000) -> LogEstimate:
    """Integrate exp(log_f(beta)) over beta = loc + chol @ z, z in [-radius, radius]^d.

    ``log_f`` maps an (N, d) array of points to N log values.
    """
    loc = np.atleast_1d(np.asarray(loc, dtype=float))
    chol = np.atleast_2d(np.asarray(chol, dtype=float))
    d = loc.size
    z, lw = box_rule(d, radius)
    log_jac = float(np.sum(np.log(np.abs(np.diag(chol)))))
    vals = np.empty(z.shape[0])
    for start in range(0, z.shape[0], chunk):
        beta = loc + z[start : start + chunk] @ chol.T
        vals[start : start + chunk] = log_f(beta)
    if np.any(np.isnan(vals)) or np.any(vals == math.inf):
        raise NumericalError("integrand produced nan or +inf on the quadrature grid")
    total = special.logsumexp(vals + lw)
    return LogEstimate(float(total + log_jac), 0.0, int(z.shape[0]))


# --------------------------------------------------------------------------
# importance sampling
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Proposal:
    """Multivariate Student-t proposal: loc + chol @ z / sqrt(u/df)."""

    loc: np.ndarray
    chol: np.ndarray
    df: float = 5.0

    @property
    def dim(self) -> int:
        return int(np.asarray(self.loc).size)

    def draw(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (points, log density at the points)."""
        d = self.dim
        z = rng.standard_normal((size, d))
        u = rng.chisquare(self.df, size)
        scale = np.sqrt(self.df / u)
        x = np.asarray(self.loc) + (z * scale[:, None]) @ np.asarray(self.chol).T
        quad = np.sum(z * z, axis=1) * (scale * scale)
        return x, self._log_pdf_from_quad(quad)

    def log_pdf(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        r = linalg.solve_triangular(np.asarray(self.chol), (x - self.loc).T, lower=True)
        return self._log_pdf_from_quad(np.sum(r * r, axis=0))

    def _log_pdf_from_quad(self, quad):
        d, nu = self.dim, self.df
        log_det = float(np.sum(np.log(np.abs(np.diag(np.atleast_2d(self.chol))))))
        const = (
            special.gammaln(0.5 * (nu + d))
            - special.gammaln(0.5 * nu)
            - 0.5 * d * math.log(nu * math.pi)
            - log_det
        )
        return const - 0.5 * (nu + d) * np.log1p(quad / nu)


def _chunk_rng(seed: int, index: int) -> np.random.Generator:
    # counter-based generator keyed by (seed, chunk); independent of scheduling
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def integrate_mc(log_f, proposal: Proposal, cfg: IntegrationConfig | None = None) -> LogEstimate:
    """Importance-sampling estimate of ln of the integral of exp(log_f).

    Draws are split into fixed-size chunks, each with its own substream, and
    reduced in chunk order, so results are bit-identical for any ``workers``.
    """
    cfg = cfg or IntegrationConfig()
    sizes = [CHUNK_SIZE] * (cfg.mc_samples // CHUNK_SIZE)
    if cfg.mc_samples % CHUNK_SIZE:
        sizes.append(cfg.mc_samples % CHUNK_SIZE)

    def run(i):
        x, logq = proposal.draw(_chunk_rng(cfg.seed, i), sizes[i])
        return np.asarray(log_f(x), dtype=float) - logq

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    lw = np.concatenate(parts)
    n = lw.size
    if np.any(np.isnan(lw)) or np.any(lw == math.inf):
        raise NumericalError("importance weights contain nan or +inf")

    notes = []
    top = float(np.max(lw))
    if top == -math.inf:
        notes.append("degenerate: integrand vanished on every draw")
        return LogEstimate(-math.inf, 0.0, n, tuple(notes))
    w = np.exp(lw - top)
    mean = float(np.mean(w))
    sd = float(np.std(w, ddof=1))
    rel_se = sd / (mean * math.sqrt(n))
    log_value = top + math.log(mean)
    ess = float(np.sum(w) ** 2 / np.sum(w * w))
    if rel_se == 0.0:
        notes.append("degenerate: zero weight variance, standard error is not informative")
    if ess < 0.01 * n:
        notes.append(f"degenerate: effective sample size {ess:.1f} is below 1% of {n} draws")
    if rel_se > cfg.target_rel_se:
        notes.append(f"relative standard error {rel_se:.3g} exceeds target {cfg.target_rel_se:.3g}")
    return LogEstimate(log_value, rel_se, n, tuple(notes))


# --------------------------------------------------------------------------
# linear algebra
# --------------------------------------------------------------------------


def nnls_feasible(target, basis, tol: float = 1e-10) -> tuple[bool, np.ndarray]:
    """Is ``target`` a nonnegative combination of the ``basis`` vectors?"""
    b = np.asarray(target, dtype=float)
    vecs = [np.asarray(v, dtype=float) for v in basis]
    if not vecs:
        raise DomainError("nnls_feasible needs a nonempty basis")
    M = np.column_stack(vecs)
    if M.shape[0] != b.size:
        raise DomainError("basis vectors and target have different dimensions")
    coef, rnorm = optimize.nnls(M, b)
    return bool(rnorm <= tol * (1.0 + np.linalg.norm(b))), coef


def rank_and_basis(matrix, tol: float = 1e-10) -> tuple[int, np.ndarray]:
    """Numerical rank (singular values above tol * largest) and an orthonormal column basis."""
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    if M.size == 0:
        return 0, np.zeros((M.shape[0], 0))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s[0] == 0.0:
        return 0, np.zeros((M.shape[0], 0))
    r = int(np.sum(s > tol * s[0]))
    return r, U[:, :r]


def poisson_mode(data, positive_only: bool = False, max_iter: int = 100):
    """Maximum-likelihood beta of the Poisson log-linear model.

    ``data`` needs ``counts``, ``A`` and ``offsets``.  With ``positive_only``
    only the rows with positive counts enter.  Returns (mode, negative Hessian).
    """
    x = np.asarray(data.counts, dtype=float)
    A = np.asarray(data.A, dtype=float)
    a0 = np.asarray(data.offsets, dtype=float)
    if positive_only:
        keep = x > 0
        x, A, a0 = x[keep], A[keep], a0[keep]
    q = A.shape[1]
    if A.shape[0] == 0 or rank_and_basis(A)[0] < q:
        raise DesignRankError("design rows used for the Poisson mode are not of full column rank")

    def loglik(b):
        eta = a0 + A @ b
        return float(np.sum(x * eta - np.exp(eta)))

    beta = np.linalg.lstsq(A, np.log(x + 0.5) - a0, rcond=None)[0]
    cur = loglik(beta)
    for _ in range(max_iter):
        lam = np.exp(a0 + A @ beta)
        grad = A.T @ (x - lam)
        H = (A * lam[:, None]).T @ A
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular Poisson information matrix") from exc
        t = 1.0
        while True:
            cand = beta + t * step
            val = loglik(cand)
            if val >= cur - 1e-12 * abs(cur) or t < 1e-10:
                break
            t *= 0.5
        beta, cur = cand, val
        if not np.all(np.isfinite(beta)) or np.max(np.abs(beta)) > 1e3:
            raise NumericalError("Poisson likelihood has no finite maximum")
        if np.max(np.abs(t * step)) < 1e-11:
            lam = np.exp(a0 + A @ beta)
            return beta, (A * lam[:, None]).T @ A
    raise NumericalError(f"Newton iteration did not converge in {max_iter} iterations")
