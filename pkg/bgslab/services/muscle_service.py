"""
Intra-orthogonalization routines ("muscles") for a single m x s block.

Every tall-dimension reduction is logged on the run's EventLog with
origin=muscle. Numerical breakdown never raises to the caller: it is
reported through QRResult.status with NaN-filled factors.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from bgslab.config import settings
from bgslab.core.errors import (
    ContractViolationError,
    NonFiniteError,
    NotPositiveDefiniteError,
    SingularSolveError,
)
from bgslab.core.events import EventLog, SyncOrigin
from bgslab.core.matcore import EPS, Mat, as_mat, cholesky, gemm, house_qr, tri_solve, two_norm
from bgslab.core.results import QRResult
from bgslab.schemas.variants import MuscleId, RunStatus
from bgslab.services import lowsync
from bgslab.utils.helpers import make_rng

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class MuscleParams:
    rpltol: float = field(default_factory=lambda: settings.DEFAULT_RPLTOL)
    rng: np.random.Generator | None = None
    auto_shift: bool = False


@dataclass(slots=True)
class SrorStep:
    y: np.ndarray
    r: np.ndarray
    rho: float
    northog: int


@dataclass(slots=True)
class _MuscleRun:
    events: EventLog
    rng: np.random.Generator
    rpltol: float
    auto_shift: bool

    def sync(self) -> None:
        self.events.record(SyncOrigin.MUSCLE)


Factors = tuple[Mat, Mat, Mat | None]


def _random_direction(rng: np.random.Generator, m: int) -> np.ndarray:
    y = rng.random(m) - 0.5
    return y / np.linalg.norm(y)


def cgs_step_sror(
    Qprev: Mat,
    x: np.ndarray,
    nu: float,
    rpltol: float,
    rng: np.random.Generator,
    events: EventLog | None = None,
    origin: SyncOrigin = SyncOrigin.MUSCLE,
) -> SrorStep:
    """
    Orthogonalize x against Qprev with selective reorthogonalization and
    random replacement of collapsed vectors.

    Projection repeats until a pass keeps more than half of the norm it
    started with. A candidate that shrinks to rpltol * nu * eps (relative
    to the original norm) is replaced by a random vector of norm nu * eps.
    """

    def sync() -> None:
        if events is not None:
            events.record(origin)

    m, nq = Qprev.shape
    x = np.asarray(x, dtype=np.float64).ravel()
    r = np.zeros(nq)
    northog = 0

    nux = float(np.linalg.norm(x))
    sync()
    if nq == 0:
        if nux == 0.0:
            return SrorStep(_random_direction(rng, m), r, 0.0, northog)
        return SrorStep(x / nux, r, nux, northog)

    nu = max(float(nu), nux)
    if nux != 0.0:
        zero_norm = False
        y = x / nux
        nu = nu / nux
    else:
        zero_norm = True
        y = _random_direction(rng, m)
        nu = 1.0

    nu1 = nu
    while True:
        northog += 1
        s = gemm(Qprev, y.reshape(-1, 1), trans_a=True).ravel()
        sync()
        r += s
        y = y - Qprev @ s
        nu2 = float(np.linalg.norm(y))
        sync()
        if nu2 > 0.5 * nu1:
            break
        if nu2 > rpltol * nu * EPS:
            nu1 = nu2
        else:
            # orthogonalization fault
            nu = nu * EPS
            nu1 = nu
            y = nu * _random_direction(rng, m)

    if zero_norm:
        return SrorStep(y / np.linalg.norm(y), np.zeros(nq), 0.0, northog)
    rho = float(np.linalg.norm(y))
    return SrorStep(y / rho, r * nux, rho * nux, northog)


def cholqr_shift(m: int, s: int, norm_sq: float) -> float:
    """Shift 11 (m s + s (s + 1)) eps ||X||_2^2 for shifted CholQR."""
    return 11.0 * (m * s + s * (s + 1)) * EPS * norm_sq


def _cgs(X: Mat, run: _MuscleRun) -> Factors:
    """Two reductions per column; the first column has nothing to project against, so 2s - 1 in all."""
    m, s = X.shape
    Q = np.zeros((m, s), order="F")
    R = np.zeros((s, s), order="F")
    for k in range(s):
        w = X[:, k]
        if k:
            r = Q[:, :k].T @ w
            run.sync()
            R[:k, k] = r
            w = w - Q[:, :k] @ r
        R[k, k] = np.linalg.norm(w)
        run.sync()
        Q[:, k] = w / R[k, k]
    return Q, R, None


def _cgs_p(X: Mat, run: _MuscleRun) -> Factors:
    m, s = X.shape
    Q = np.zeros((m, s), order="F")
    R = np.zeros((s, s), order="F")
    R[0, 0] = np.linalg.norm(X[:, 0])
    run.sync()
    Q[:, 0] = X[:, 0] / R[0, 0]
    for k in range(1, s):
        x = X[:, k]
        g = np.hstack([Q[:, :k], x.reshape(-1, 1)]).T @ x
        run.sync()
        r, omega = g[:k], g[k]
        R[:k, k] = r
        # Pythagorean diagonal: scalar Cholesky of omega - r^T r
        R[k, k] = cholesky(np.array([[omega - r @ r]]))[0, 0]
        Q[:, k] = (x - Q[:, :k] @ r) / R[k, k]
    return Q, R, None


def _cgs_iro(X: Mat, run: _MuscleRun) -> Factors:
    m, s = X.shape
    Q = np.zeros((m, s), order="F")
    R = np.zeros((s, s), order="F")
    R[0, 0] = np.linalg.norm(X[:, 0])
    run.sync()
    Q[:, 0] = X[:, 0] / R[0, 0]
    for k in range(1, s):
        x = X[:, k]
        r1 = Q[:, :k].T @ x
        run.sync()
        w = x - Q[:, :k] @ r1
        rho1 = np.linalg.norm(w)
        run.sync()
        qhat = w / rho1
        r2 = Q[:, :k].T @ qhat
        run.sync()
        w = qhat - Q[:, :k] @ r2
        rho2 = np.linalg.norm(w)
        run.sync()
        Q[:, k] = w / rho2
        R[:k, k] = r1 + r2 * rho1
        R[k, k] = rho2 * rho1
    return Q, R, None


def _mgs(X: Mat, run: _MuscleRun, passes: int = 1) -> Factors:
    m, s = X.shape
    Q = np.zeros((m, s), order="F")
    R = np.zeros((s, s), order="F")
    for k in range(s):
        w = X[:, k].copy()
        for _ in range(passes):
            for j in range(k):
                rjk = Q[:, j] @ w
                run.sync()
                w -= Q[:, j] * rjk
                R[j, k] += rjk
        R[k, k] = np.linalg.norm(w)
        run.sync()
        Q[:, k] = w / R[k, k]
    return Q, R, None


def _mgs_iro(X: Mat, run: _MuscleRun) -> Factors:
    return _mgs(X, run, passes=2)


def _mgs_t(X: Mat, run: _MuscleRun, *, lts: bool) -> Factors:
    """
    Two reductions per column after the first: the projection coefficients,
    then one fused [Q w]^T w that yields both the new column of T and the
    norm of w.
    """
    m, s = X.shape
    Q = np.zeros((m, s), order="F")
    R = np.zeros((s, s), order="F")
    T = np.eye(s, order="F")
    R[0, 0] = np.linalg.norm(X[:, 0])
    run.sync()
    Q[:, 0] = X[:, 0] / R[0, 0]
    for k in range(1, s):
        x = X[:, k]
        c = Q[:, :k].T @ x
        run.sync()
        if lts:
            r = tri_solve(T[:k, :k], c, side="left", transpose=True)
        else:
            r = T[:k, :k].T @ c
        R[:k, k] = r
        w = x - Q[:, :k] @ r
        g = np.hstack([Q[:, :k], w.reshape(-1, 1)]).T @ w
        run.sync()
        R[k, k] = np.sqrt(g[k])
        Q[:, k] = w / R[k, k]
        d = g[:k] / R[k, k]
        T[:k, k] = d if lts else -(T[:k, :k] @ d)
    return Q, R, T


def _mgs_svl(X: Mat, run: _MuscleRun) -> Factors:
    return _mgs_t(X, run, lts=False)


def _mgs_lts(X: Mat, run: _MuscleRun) -> Factors:
    return _mgs_t(X, run, lts=True)


def _mgs_cwy(X: Mat, run: _MuscleRun) -> Factors:
    return lowsync.cwy(X, 1, run.events, SyncOrigin.MUSCLE, inverse=False)


def _mgs_icwy(X: Mat, run: _MuscleRun) -> Factors:
    return lowsync.cwy(X, 1, run.events, SyncOrigin.MUSCLE, inverse=True)


def _cgs_iro_ls(X: Mat, run: _MuscleRun) -> Factors:
    Q, R = lowsync.iro_ls(X, 1, run.events, SyncOrigin.MUSCLE)
    return Q, R, None


def _cgs_sror(X: Mat, run: _MuscleRun) -> Factors:
    m, s = X.shape
    Q = np.zeros((m, s), order="F")
    R = np.zeros((s, s), order="F")
    for k in range(s):
        step = cgs_step_sror(Q[:, :k], X[:, k], 0.0, run.rpltol, run.rng, run.events)
        Q[:, k] = step.y
        R[:k, k] = step.r
        R[k, k] = step.rho
    return Q, R, None


def _house(X: Mat, run: _MuscleRun) -> Factors:
    Q, R = house_qr(X)
    # one reduction per Householder reflector
    for _ in range(X.shape[1]):
        run.sync()
    return Q, R, None


def _cholqr(X: Mat, run: _MuscleRun) -> Factors:
    G = gemm(X, X, trans_a=True)
    run.sync()
    R = cholesky(G)
    return tri_solve(R, X, side="right"), R, None


def _twice(first: Callable[[Mat, _MuscleRun], Factors]) -> Callable[[Mat, _MuscleRun], Factors]:
    def run_twice(X: Mat, run: _MuscleRun) -> Factors:
        Q1, R1, _ = first(X, run)
        Q, R2, _ = first(Q1, run)
        return Q, R2 @ R1, None

    run_twice.__name__ = f"{first.__name__}_ro"
    return run_twice


_cgs_ro = _twice(_cgs)
_mgs_ro = _twice(_mgs)
_cholqr_ro = _twice(_cholqr)


def _sh_cholqr_roro(X: Mat, run: _MuscleRun) -> Factors:
    m, s = X.shape
    G = gemm(X, X, trans_a=True)
    run.sync()
    # ||X||_2^2 read off the Gram matrix of the same reduction
    norm_sq = two_norm(G)
    sigma = cholqr_shift(m, s, norm_sq)
    try:
        R1 = cholesky(G + sigma * np.eye(s))
    except NotPositiveDefiniteError:
        if not run.auto_shift:
            raise
        logger.info("shifted CholQR: sigma=%.3e failed, retrying with ||X||^2=%.3e", sigma, norm_sq)
        R1 = cholesky(G + norm_sq * np.eye(s))
    Q1 = tri_solve(R1, X, side="right")
    Q, R2, _ = _cholqr_ro(Q1, run)
    return Q, R2 @ R1, None


_MUSCLES: dict[MuscleId, Callable[[Mat, _MuscleRun], Factors]] = {
    MuscleId.CGS: _cgs,
    MuscleId.CGS_P: _cgs_p,
    MuscleId.CGS_RO: _cgs_ro,
    MuscleId.CGS_IRO: _cgs_iro,
    MuscleId.CGS_SRO: _cgs_sror,
    MuscleId.CGS_SROR: _cgs_sror,
    MuscleId.CGS_IRO_LS: _cgs_iro_ls,
    MuscleId.MGS: _mgs,
    MuscleId.MGS_RO: _mgs_ro,
    MuscleId.MGS_IRO: _mgs_iro,
    MuscleId.MGS_SVL: _mgs_svl,
    MuscleId.MGS_LTS: _mgs_lts,
    MuscleId.MGS_CWY: _mgs_cwy,
    MuscleId.MGS_ICWY: _mgs_icwy,
    MuscleId.HOUSE_QR: _house,
    MuscleId.CHOL_QR: _cholqr,
    MuscleId.CHOL_QR_RO: _cholqr_ro,
    MuscleId.SH_CHOL_QR_RORO: _sh_cholqr_roro,
}


def effective_rpltol(muscle: MuscleId, rpltol: float) -> float:
    """CGS_SRO is CGS_SROR with the replacement tolerance pinned to 0."""
    return 0.0 if muscle is MuscleId.CGS_SRO else rpltol


def intra_orthogonalize(X: Mat, muscle: MuscleId, params: MuscleParams | None = None) -> QRResult:
    X = as_mat(X)
    m, s = X.shape
    if s < 1 or m < s:
        raise ContractViolationError(f"{muscle.value} needs m >= s >= 1, got {X.shape}")
    params = params or MuscleParams()
    if params.rpltol < 0:
        raise ContractViolationError("rpltol must be nonnegative")

    events = EventLog()
    run = _MuscleRun(
        events=events,
        rng=params.rng if params.rng is not None else make_rng(settings.DEFAULT_SEED),
        rpltol=effective_rpltol(muscle, params.rpltol),
        auto_shift=params.auto_shift,
    )
    try:
        with np.errstate(all="ignore"):
            Q, R, T = _MUSCLES[muscle](X, run)
    except NotPositiveDefiniteError as exc:
        logger.debug("%s on %sx%s: Cholesky failed (%s)", muscle.value, m, s, exc)
        return QRResult.failed(m, s, RunStatus.CHOL_FAIL, events)
    except (NonFiniteError, SingularSolveError) as exc:
        logger.debug("%s on %sx%s: %s", muscle.value, m, s, exc)
        return QRResult.failed(m, s, RunStatus.NAN_ENCOUNTERED, events)

    status = RunStatus.OK
    if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(R))):
        status = RunStatus.NAN_ENCOUNTERED
    return QRResult(
        Q=np.asfortranarray(Q),
        R=np.asfortranarray(R),
        T=np.eye(s, order="F") if T is None else np.asfortranarray(T),
        status=status,
        events=events,
    )
