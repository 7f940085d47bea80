"""Regression data container with zero counts stored first."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DesignRankError, InputError
from .numerics import rank_and_basis


@dataclass(frozen=True)
class RegressionData:
    """Counts, design matrix and offsets, reordered so zero counts come first.

    ``permutation[i]`` is the original row index of stored row ``i``.
    """

    counts: np.ndarray
    A: np.ndarray
    offsets: np.ndarray
    permutation: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.size)

    @property
    def q(self) -> int:
        return int(self.A.shape[1])

    @property
    def k(self) -> int:
        return int(np.sum(self.counts == 0))

    @property
    def A_plus(self) -> np.ndarray:
        return self.A[self.k :]

    @property
    def log_factorial_sum(self) -> float:
        return float(np.sum(gammaln(self.counts + 1.0)))


def load_regression(counts, A, offsets=None) -> RegressionData:
    """Validate inputs and apply the stable zero-first reordering."""
    x = np.asarray(counts)
    if x.ndim != 1 or x.size == 0:
        raise InputError("counts must be a nonempty 1-D sequence")
    xf = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xf)) or np.any(xf < 0) or np.any(xf != np.round(xf)):
        raise InputError("counts must be nonnegative integers")
    M = np.asarray(A, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2 or M.shape[0] != x.size:
        raise InputError(f"design matrix must have {x.size} rows, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError("design matrix has non-finite entries")
    a0 = np.zeros(x.size) if offsets is None else np.asarray(offsets, dtype=float).ravel()
    if a0.size != x.size or not np.all(np.isfinite(a0)):
        raise InputError("offsets must be finite and match the number of counts")
    if rank_and_basis(M)[0] < M.shape[1]:
        raise DesignRankError(f"design matrix has rank below q = {M.shape[1]}")
    perm = np.argsort(xf > 0, kind="stable")
    return RegressionData(
        counts=xf[perm].astype(np.int64),
        A=M[perm].copy(),
        offsets=a0[perm].copy(),
        permutation=perm,
    )
