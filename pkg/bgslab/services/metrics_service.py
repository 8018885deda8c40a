import logging
import math
from collections.abc import Callable, Sequence

import numpy as np

from bgslab.core.errors import (
    ContractViolationError,
    ConvergenceError,
    NonFiniteError,
    SingularSolveError,
    UndefinedInputError,
)
from bgslab.core.events import SyncOrigin
from bgslab.core.matcore import Mat, gemm, jacobi_svd_values, tri_solve, two_norm
from bgslab.core.results import BlockQRResult, QRResult
from bgslab.schemas.report import StabilityReport, TriadReport
from bgslab.schemas.variants import INVERSE_FORM_VARIANTS, CellStatus, MuscleId, SkeletonId

logger = logging.getLogger(__name__)

_METRIC_ERRORS = (ConvergenceError, NonFiniteError, SingularSolveError, UndefinedInputError)


def loss_of_orthogonality(Q: Mat) -> float:
    """||I - Q^T Q||_2."""
    n = Q.shape[1]
    return two_norm(np.eye(n) - gemm(Q, Q, trans_a=True))


def _norm_of(X: Mat) -> float:
    scale = two_norm(X)
    if scale == 0.0:
        raise UndefinedInputError("metric undefined for ||X|| = 0")
    return scale


def relative_residual(Q: Mat, R: Mat, X: Mat) -> float:
    """||QR - X||_2 / ||X||_2."""
    scale = _norm_of(X)
    return two_norm(gemm(Q, R, alpha=1.0, beta=-1.0, C=X)) / scale


def relative_cholesky_residual(R: Mat, X: Mat) -> float:
    """||X^T X - R^T R||_2 / ||X||_2^2."""
    scale = _norm_of(X)
    gap = gemm(X, X, trans_a=True) - gemm(R, R, trans_a=True)
    return two_norm(gap) / scale**2


def triad_residuals(Q: Mat, R: Mat, T: Mat) -> tuple[float, float]:
    """Frobenius norms of T S - I and (I - T) R with S = triu(Q^T Q)."""
    n = Q.shape[1]
    if T.shape != (n, n) or R.shape[0] != n:
        raise ContractViolationError(f"triad needs square T and R conforming to Q: {T.shape}, {R.shape}, {Q.shape}")
    S = np.triu(gemm(Q, Q, trans_a=True))
    identity = np.eye(n)
    res_ts = float(np.linalg.norm(T @ S - identity, "fro"))
    res_tr = float(np.linalg.norm((identity - T) @ R, "fro"))
    return res_ts, res_tr


def effective_correction(T: Mat, variant: MuscleId | SkeletonId | None) -> Mat:
    """T itself, or T^{-1} for variants whose T approximates triu(Q^T Q)."""
    if variant in INVERSE_FORM_VARIANTS:
        return tri_solve(T, np.eye(T.shape[0]), side="left")
    return T


def condition_number(X: Mat) -> float:
    values = jacobi_svd_values(X if X.shape[0] >= X.shape[1] else X.T)
    if values.size == 0:
        return 1.0
    if values[-1] == 0.0:
        return math.inf
    return float(values[0] / values[-1])


def fit_loglog_slope(
    kappas: Sequence[float],
    values: Sequence[float],
    *,
    floor: float = 0.0,
    ceiling: float = math.inf,
) -> float:
    """Least-squares slope of log10(values) against log10(kappas), restricted to floor <= value <= ceiling."""
    x = np.asarray(kappas, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0) & (y >= floor) & (y <= ceiling)
    if np.count_nonzero(keep) < 2:
        raise UndefinedInputError("slope needs at least two points inside the window")
    slope, _ = np.polyfit(np.log10(x[keep]), np.log10(y[keep]), 1)
    return float(slope)


def failed_report(status: CellStatus, *, kappa: float, seed: int, sync_skeleton: int = 0, sync_muscle: int = 0) -> StabilityReport:
    return StabilityReport(
        loo=math.nan,
        rel_res=math.nan,
        rel_chol_res=math.nan,
        kappa=kappa,
        sync_skeleton=sync_skeleton,
        sync_muscle=sync_muscle,
        status=status,
        seed=seed,
    )


def _measure(name: str, compute: Callable[[], float]) -> float:
    try:
        return compute()
    except _METRIC_ERRORS as exc:
        logger.warning("%s not available: %s", name, exc)
        return math.nan


def _triad(X: Mat, result: QRResult | BlockQRResult, variant: MuscleId | SkeletonId | None) -> TriadReport:
    try:
        res_ts, res_tr = triad_residuals(result.Q, result.R, effective_correction(result.T, variant))
    except _METRIC_ERRORS as exc:
        logger.warning("triad residuals not available: %s", exc)
        res_ts = res_tr = math.nan
    res_qr = float(np.linalg.norm(result.Q @ result.R - X, "fro"))
    return TriadReport(res_ts=res_ts, res_qr=res_qr, res_tr=res_tr)


def build_report(
    X: Mat,
    result: QRResult | BlockQRResult,
    *,
    kappa: float,
    seed: int,
    variant: MuscleId | SkeletonId | None = None,
) -> StabilityReport:
    """
    Measure a finished run; failed runs get NaN metrics and keep their sync
    counts. A metric that cannot be computed on an OK run is NaN on its own.
    """
    sync_skeleton = result.events.count(SyncOrigin.SKELETON)
    sync_muscle = result.events.count(SyncOrigin.MUSCLE)
    if not result.ok:
        return failed_report(
            CellStatus.from_run(result.status),
            kappa=kappa,
            seed=seed,
            sync_skeleton=sync_skeleton,
            sync_muscle=sync_muscle,
        )

    return StabilityReport(
        loo=_measure("loo", lambda: loss_of_orthogonality(result.Q)),
        rel_res=_measure("rel_res", lambda: relative_residual(result.Q, result.R, X)),
        rel_chol_res=_measure("rel_chol_res", lambda: relative_cholesky_residual(result.R, X)),
        triad=_triad(X, result, variant),
        kappa=kappa,
        sync_skeleton=sync_skeleton,
        sync_muscle=sync_muscle,
        status=CellStatus.OK,
        seed=seed,
    )
