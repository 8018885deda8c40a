"""Exception hierarchy shared by the kernels, the algorithms and the harness."""

from bgslab.schemas.variants import RunStatus


class BgsLabError(Exception):
    """Root of every error raised by bgslab."""


class ContractViolationError(BgsLabError, ValueError):
    """Operand shapes or preconditions do not hold."""


class SingularSolveError(BgsLabError):
    """Triangular solve with an exactly zero diagonal entry."""


class NotPositiveDefiniteError(BgsLabError):
    """Cholesky met a pivot <= 0."""


class NonFiniteError(BgsLabError):
    """NaN or Inf reached a kernel that cannot propagate it meaningfully."""


class ConvergenceError(BgsLabError):
    """Jacobi SVD exhausted its sweep budget."""


class IncompatibleVariantError(BgsLabError):
    """Skeleton, muscle and option combination that cannot run together."""


class ParameterError(BgsLabError, ValueError):
    """Generator parameters do not fit the requested layout."""


class UndefinedInputError(BgsLabError, ValueError):
    """Metric undefined for the given input, e.g. a zero-norm X."""


class ConfigurationError(BgsLabError):
    """Run configuration cannot be honoured."""


class Breakdown(BgsLabError):
    """Aborts an orthogonalization run with a failure status."""

    def __init__(self, status: RunStatus, detail: str = ""):
        self.status = status
        self.detail = detail
        super().__init__(f"{status.value}: {detail}" if detail else status.value)
