"""
Block Gram-Schmidt skeletons. Each skeleton walks the block vectors left to
right and hands every diagonal block to a muscle through intra_orthogonalize.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from bgslab.config import settings
from bgslab.core.errors import (
    Breakdown,
    ContractViolationError,
    IncompatibleVariantError,
    NonFiniteError,
    NotPositiveDefiniteError,
    SingularSolveError,
)
from bgslab.core.events import EventLog, SyncOrigin
from bgslab.core.matcore import EPS, Mat, as_mat, cholesky, gemm, house_qr, tri_solve, two_norm
from bgslab.core.results import BlockQRResult
from bgslab.schemas.layout import BlockLayout, SkeletonOptions
from bgslab.schemas.variants import INVERSE_FORM_VARIANTS, SROR_MUSCLES, MuscleId, RunStatus, SkeletonId
from bgslab.services import lowsync
from bgslab.services.muscle_service import MuscleParams, effective_rpltol, intra_orthogonalize
from bgslab.utils.helpers import make_rng

logger = logging.getLogger(__name__)

TFIX_SKELETONS = frozenset({SkeletonId.BCGS_IRO, SkeletonId.BMGS})


@dataclass(slots=True)
class BlockStep:
    Qk: Mat
    Rcol: Mat
    Rdiag: Mat
    # columns swapped for a random direction (zero on input or an orthogonalization fault)
    replaced: np.ndarray


@dataclass(slots=True)
class _SkeletonRun:
    layout: BlockLayout
    muscle: MuscleId
    opts: SkeletonOptions
    rng: np.random.Generator
    events: EventLog
    Q: Mat
    R: Mat
    T: Mat
    inverse_form: bool = False

    @property
    def t_fix(self) -> bool:
        return self.opts.t_fix

    def sync(self) -> None:
        self.events.record(SyncOrigin.SKELETON)

    def io(self, W: Mat) -> tuple[Mat, Mat, Mat]:
        result = intra_orthogonalize(
            W,
            self.muscle,
            MuscleParams(rpltol=self.opts.rpltol, rng=self.rng, auto_shift=self.opts.auto_shift),
        )
        self.events.extend(result.events)
        if not result.ok:
            raise Breakdown(result.status, f"{self.muscle.value} on a {W.shape[0]}x{W.shape[1]} block")
        T = result.T
        if self.opts.convert_t_form and (self.muscle in INVERSE_FORM_VARIANTS) != self.inverse_form:
            T = tri_solve(T, np.eye(T.shape[0]), side="left")
        return result.Q, result.R, T

    def project(self, k: int, W: Mat) -> Mat:
        """Coefficients of W against blocks 0..k-1, one fused reduction; T-fixed when enabled."""
        head = self.layout.leading(k)
        coeffs = gemm(self.Q[:, head], W, trans_a=True)
        self.sync()
        if self.t_fix:
            coeffs = self._tfix_apply(k, coeffs)
        return coeffs

    def _tfix_apply(self, k: int, coeffs: Mat) -> Mat:
        # Q_j -> Q_j T_jj for every previous block
        out = coeffs.copy()
        for j in range(k):
            rows = self.layout.block(j)
            out[rows] = gemm(self.T[rows, rows], coeffs[rows], trans_a=True)
        return out


def _blocks(run: _SkeletonRun):
    layout = run.layout
    return layout.p, layout.block, layout.leading


def _bcgs(X: Mat, run: _SkeletonRun) -> None:
    p, blk, lead = _blocks(run)
    run.Q[:, blk(0)], run.R[blk(0), blk(0)], _ = run.io(X[:, blk(0)])
    for k in range(1, p):
        Xk = X[:, blk(k)]
        Rcol = run.project(k, Xk)
        run.R[lead(k), blk(k)] = Rcol
        W = gemm(run.Q[:, lead(k)], Rcol, alpha=-1.0, beta=1.0, C=Xk)
        run.Q[:, blk(k)], run.R[blk(k), blk(k)], _ = run.io(W)


def _bcgs_pip(X: Mat, run: _SkeletonRun) -> None:
    p, blk, lead = _blocks(run)
    s = run.layout.s
    run.Q[:, blk(0)], run.R[blk(0), blk(0)], _ = run.io(X[:, blk(0)])
    for k in range(1, p):
        Xk = X[:, blk(k)]
        head = k * s
        G = gemm(np.hstack([run.Q[:, lead(k)], Xk]), Xk, trans_a=True)
        run.sync()
        Rcol, omega = G[:head], G[head:]
        Rkk = cholesky(omega - gemm(Rcol, Rcol, trans_a=True))
        W = gemm(run.Q[:, lead(k)], Rcol, alpha=-1.0, beta=1.0, C=Xk)
        run.R[lead(k), blk(k)] = Rcol
        run.R[blk(k), blk(k)] = Rkk
        run.Q[:, blk(k)] = tri_solve(Rkk, W, side="right")


def _bcgs_pio(X: Mat, run: _SkeletonRun) -> None:
    p, blk, lead = _blocks(run)
    m, s = run.layout.m, run.layout.s
    run.Q[:, blk(0)], run.R[blk(0), blk(0)], _ = run.io(X[:, blk(0)])
    for k in range(1, p):
        Xk = X[:, blk(k)]
        head = k * s
        Rcol = gemm(run.Q[:, lead(k)], Xk, trans_a=True)
        run.sync()
        stack = np.zeros((m + head, 2 * s), order="F")
        stack[:m, :s] = Xk
        stack[m:, s:] = Rcol
        _, Rstack, _ = run.io(stack)
        S, Tb = Rstack[:s, :s], Rstack[s:, s:]
        Rkk = cholesky(gemm(S, S, trans_a=True) - gemm(Tb, Tb, trans_a=True))
        W = gemm(run.Q[:, lead(k)], Rcol, alpha=-1.0, beta=1.0, C=Xk)
        run.R[lead(k), blk(k)] = Rcol
        run.R[blk(k), blk(k)] = Rkk
        run.Q[:, blk(k)] = tri_solve(Rkk, W, side="right")


def _bcgs_ro(X: Mat, run: _SkeletonRun) -> None:
    _bcgs(X, run)
    R1 = run.R.copy(order="F")
    Q1 = run.Q.copy(order="F")
    run.R[:] = 0.0
    _bcgs(Q1, run)
    run.R[:] = run.R @ R1


def _bcgs_iro(X: Mat, run: _SkeletonRun) -> None:
    p, blk, lead = _blocks(run)
    Q0, R0, T0 = run.io(X[:, blk(0)])
    if run.opts.reorth_first_block:
        Q0, R0b, T0 = run.io(Q0)
        R0 = R0b @ R0
    run.Q[:, blk(0)], run.R[blk(0), blk(0)], run.T[blk(0), blk(0)] = Q0, R0, T0
    for k in range(1, p):
        Xk = X[:, blk(k)]
        R1 = run.project(k, Xk)
        W = gemm(run.Q[:, lead(k)], R1, alpha=-1.0, beta=1.0, C=Xk)
        Qhat, Rd1, _ = run.io(W)
        R2 = run.project(k, Qhat)
        W = gemm(run.Q[:, lead(k)], R2, alpha=-1.0, beta=1.0, C=Qhat)
        Qk, Rd2, Tk = run.io(W)
        run.Q[:, blk(k)] = Qk
        run.T[blk(k), blk(k)] = Tk
        run.R[lead(k), blk(k)] = R1 + R2 @ Rd1
        run.R[blk(k), blk(k)] = Rd2 @ Rd1


def _bcgs_iro_ls(X: Mat, run: _SkeletonRun) -> None:
    run.Q[:], run.R[:] = lowsync.iro_ls(X, run.layout.s, run.events, SyncOrigin.SKELETON)


def bcgs_step_sror(
    Qprev: Mat,
    Xk: Mat,
    rpltol: float,
    rng: np.random.Generator,
    events: EventLog | None = None,
) -> BlockStep:
    """
    Project Xk against Qprev with column-wise fault checks, then
    orthogonalize the surviving block with CGS_SROR.

    A column is projected again while a pass loses more than half of its
    norm; a column that collapses to rpltol * nu * eps is replaced by a
    random vector of norm nu * eps. Identically zero columns start as random
    vectors of norm eps times the largest column norm and get zero R entries.
    """
    events = events if events is not None else EventLog()
    m, s = Xk.shape
    nq = Qprev.shape[1]

    W = np.array(Xk, dtype=np.float64, order="F")
    nu = np.linalg.norm(W, axis=0)
    events.record(SyncOrigin.SKELETON)
    zero = nu == 0.0
    replaced = zero.copy()
    scale = float(nu.max()) if np.any(~zero) else 1.0
    ref = np.where(zero, scale * EPS, nu)
    for j in np.flatnonzero(zero):
        direction = rng.random(m) - 0.5
        W[:, j] = ref[j] * direction / np.linalg.norm(direction)

    Rcol = np.zeros((nq, s), order="F")
    if nq:
        nu1 = ref.copy()
        active = np.ones(s, dtype=bool)
        while np.any(active):
            cols = np.flatnonzero(active)
            S = gemm(Qprev, W[:, cols], trans_a=True)
            events.record(SyncOrigin.SKELETON)
            Rcol[:, cols] += S
            W[:, cols] = gemm(Qprev, S, alpha=-1.0, beta=1.0, C=W[:, cols])
            nu2 = np.linalg.norm(W[:, cols], axis=0)
            events.record(SyncOrigin.SKELETON)
            for j, norm_j in zip(cols, nu2, strict=True):
                if norm_j > 0.5 * nu1[j]:
                    active[j] = False
                elif norm_j > rpltol * ref[j] * EPS:
                    nu1[j] = norm_j
                else:
                    ref[j] *= EPS
                    replaced[j] = True
                    nu1[j] = ref[j]
                    direction = rng.random(m) - 0.5
                    W[:, j] = ref[j] * direction / np.linalg.norm(direction)
                    logger.debug("block SROR: replaced column %s (norm %.3e)", j, ref[j])
        Rcol[:, zero] = 0.0

    inner = intra_orthogonalize(W, MuscleId.CGS_SROR, MuscleParams(rpltol=rpltol, rng=rng))
    events.extend(inner.events)
    if not inner.ok:
        raise Breakdown(inner.status, "CGS_SROR inside the block step")
    Rdiag = inner.R.copy(order="F")
    Rdiag[:, zero] = 0.0
    return BlockStep(Qk=inner.Q, Rcol=Rcol, Rdiag=Rdiag, replaced=replaced)


def _bcgs_sror(X: Mat, run: _SkeletonRun) -> None:
    p, blk, lead = _blocks(run)
    rpltol = effective_rpltol(run.muscle, run.opts.rpltol)
    for k in range(p):
        step = bcgs_step_sror(run.Q[:, lead(k)], X[:, blk(k)], rpltol, run.rng, run.events)
        run.Q[:, blk(k)] = step.Qk
        run.R[lead(k), blk(k)] = step.Rcol
        run.R[blk(k), blk(k)] = step.Rdiag


def _bmgs(X: Mat, run: _SkeletonRun) -> None:
    p, blk, lead = _blocks(run)
    run.Q[:, blk(0)], run.R[blk(0), blk(0)], run.T[blk(0), blk(0)] = run.io(X[:, blk(0)])
    for k in range(1, p):
        W = X[:, blk(k)].copy(order="F")
        for j in range(k):
            Qj = run.Q[:, blk(j)]
            Rjk = gemm(Qj, W, trans_a=True)
            run.sync()
            if run.t_fix:
                Rjk = gemm(run.T[blk(j), blk(j)], Rjk, trans_a=True)
            run.R[blk(j), blk(k)] = Rjk
            W = gemm(Qj, Rjk, alpha=-1.0, beta=1.0, C=W)
        run.Q[:, blk(k)], run.R[blk(k), blk(k)], run.T[blk(k), blk(k)] = run.io(W)


def _bmgs_t(X: Mat, run: _SkeletonRun, *, lts: bool) -> None:
    p, blk, lead = _blocks(run)
    run.Q[:, blk(0)], run.R[blk(0), blk(0)], run.T[blk(0), blk(0)] = run.io(X[:, blk(0)])
    for k in range(1, p):
        Xk = X[:, blk(k)]
        Qlead, Tlead = run.Q[:, lead(k)], run.T[lead(k), lead(k)]
        coeffs = gemm(Qlead, Xk, trans_a=True)
        run.sync()
        if lts:
            Rcol = tri_solve(Tlead, coeffs, side="left", transpose=True)
        else:
            Rcol = gemm(Tlead, coeffs, trans_a=True)
        run.R[lead(k), blk(k)] = Rcol
        W = gemm(Qlead, Rcol, alpha=-1.0, beta=1.0, C=Xk)
        Qk, Rkk, Tkk = run.io(W)
        run.Q[:, blk(k)], run.R[blk(k), blk(k)], run.T[blk(k), blk(k)] = Qk, Rkk, Tkk
        coupling = gemm(Qlead, Qk, trans_a=True)
        run.sync()
        if lts:
            run.T[lead(k), blk(k)] = gemm(coupling, Tkk)
        else:
            run.T[lead(k), blk(k)] = -gemm(Tlead, gemm(coupling, Tkk))


def _bmgs_cwy(X: Mat, run: _SkeletonRun, *, inverse: bool) -> None:
    def final_step(U: Mat) -> tuple[Mat, Mat]:
        Qp, Rpp, _ = run.io(U)
        return Qp, Rpp

    run.Q[:], run.R[:], run.T[:] = lowsync.cwy(
        X, run.layout.s, run.events, SyncOrigin.SKELETON, inverse=inverse, final_step=final_step
    )


_SKELETONS: dict[SkeletonId, Callable[[Mat, _SkeletonRun], None]] = {
    SkeletonId.BCGS: _bcgs,
    SkeletonId.BCGS_PIP: _bcgs_pip,
    SkeletonId.BCGS_PIO: _bcgs_pio,
    SkeletonId.BCGS_RO: _bcgs_ro,
    SkeletonId.BCGS_IRO: _bcgs_iro,
    SkeletonId.BCGS_IRO_LS: _bcgs_iro_ls,
    SkeletonId.BCGS_SROR: _bcgs_sror,
    SkeletonId.BMGS: _bmgs,
    SkeletonId.BMGS_SVL: lambda X, run: _bmgs_t(X, run, lts=False),
    SkeletonId.BMGS_LTS: lambda X, run: _bmgs_t(X, run, lts=True),
    SkeletonId.BMGS_CWY: lambda X, run: _bmgs_cwy(X, run, inverse=False),
    SkeletonId.BMGS_ICWY: lambda X, run: _bmgs_cwy(X, run, inverse=True),
}


def check_compatibility(skeleton: SkeletonId, muscle: MuscleId, opts: SkeletonOptions) -> None:
    """Raise IncompatibleVariantError for pairings that cannot run."""
    if skeleton is SkeletonId.BCGS_SROR and muscle not in SROR_MUSCLES:
        raise IncompatibleVariantError(
            f"{skeleton.value} runs only with CGS_SRO or CGS_SROR, not {muscle.value}"
        )
    if skeleton is SkeletonId.BCGS and opts.t_fix:
        raise IncompatibleVariantError("t_fix with BCGS reproduces BMGS_SVL; use BMGS_SVL instead")


def uses_tfix(skeleton: SkeletonId, opts: SkeletonOptions) -> bool:
    return opts.t_fix and skeleton in TFIX_SKELETONS


def block_orthogonalize(
    X: Mat,
    layout: BlockLayout,
    skeleton: SkeletonId,
    muscle: MuscleId,
    opts: SkeletonOptions | None = None,
    rng: np.random.Generator | None = None,
) -> BlockQRResult:
    opts = opts or SkeletonOptions()
    check_compatibility(skeleton, muscle, opts)
    X = as_mat(X)
    if X.shape != (layout.m, layout.n):
        raise ContractViolationError(f"X is {X.shape}, layout expects {(layout.m, layout.n)}")
    if opts.t_fix and skeleton not in TFIX_SKELETONS:
        logger.debug("t_fix has no effect on %s", skeleton.value)
        opts = opts.model_copy(update={"t_fix": False})

    n = layout.n
    run = _SkeletonRun(
        layout=layout,
        muscle=muscle,
        opts=opts,
        rng=rng if rng is not None else make_rng(settings.DEFAULT_SEED),
        events=EventLog(),
        Q=np.zeros((layout.m, n), order="F"),
        R=np.zeros((n, n), order="F"),
        T=np.eye(n, order="F"),
        inverse_form=skeleton in INVERSE_FORM_VARIANTS,
    )
    status = RunStatus.OK
    try:
        with np.errstate(all="ignore"):
            _SKELETONS[skeleton](X, run)
    except Breakdown as exc:
        status = exc.status
    except NotPositiveDefiniteError:
        status = RunStatus.CHOL_FAIL
    except (NonFiniteError, SingularSolveError):
        status = RunStatus.NAN_ENCOUNTERED

    if status is RunStatus.OK and not (np.all(np.isfinite(run.Q)) and np.all(np.isfinite(run.R))):
        status = RunStatus.NAN_ENCOUNTERED
    if status is not RunStatus.OK:
        logger.debug("%s o %s stopped with %s", skeleton.value, muscle.value, status.value)
    return BlockQRResult(Q=run.Q, R=run.R, T=run.T, status=status, events=run.events)


def verify_block_pythagorean(Y: Mat, Z: Mat) -> float:
    """||R^T R - (S^T S + T^T T)||_2 / ||X||_2^2 for the QR factors R, S, T of X = Y + Z, Y, Z."""
    Y = as_mat(Y)
    Z = as_mat(Z)
    if Y.shape != Z.shape:
        raise ContractViolationError(f"Y is {Y.shape} but Z is {Z.shape}")
    X = Y + Z
    _, R = house_qr(X)
    _, S = house_qr(Y)
    _, T = house_qr(Z)
    gap = gemm(R, R, trans_a=True) - (gemm(S, S, trans_a=True) + gemm(T, T, trans_a=True))
    scale = two_norm(X)
    if scale == 0.0:
        raise ContractViolationError("Y + Z must be nonzero")
    return two_norm(gap) / scale**2
