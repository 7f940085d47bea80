"""Exception hierarchy shared by every zipbf module."""


class ZipBfError(Exception):
    """Base class for all package errors."""


class InputError(ZipBfError, ValueError):
    """Malformed or inconsistent input data."""


class DomainError(ZipBfError, ValueError):
    """Argument outside the domain of a function."""


class DesignRankError(InputError):
    """Design matrix does not have full column rank."""


class AllZerosError(DomainError):
    """All counts are zero, so the improper-prior marginal under the ZIP model is infinite.

    Use :func:`zipbf.exact_bf.log_bf_all_zeros` (proper Gamma prior) instead.
    """


class PreconditionError(ZipBfError, ValueError):
    """A routine was called on data it is not meant for (e.g. full-rank data on the rank-deficient path)."""


class IntegrabilityError(ZipBfError):
    """The chosen prior is not known to give a finite marginal for this design."""


class NumericalError(ZipBfError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class AccuracyError(NumericalError):
    """Quadrature did not reach the requested tolerance.

    ``best`` carries the best available estimate (a ``LogEstimate``).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
