"""
One-reduction-per-block kernels shared by the column-wise muscles (width 1)
and their block skeletons (width s).
"""

from collections.abc import Callable

import numpy as np

from bgslab.core.events import EventLog, SyncOrigin
from bgslab.core.matcore import Mat, cholesky, gemm, tri_solve

FinalStep = Callable[[Mat], tuple[Mat, Mat]]


def iro_ls(X: Mat, width: int, events: EventLog, origin: SyncOrigin) -> tuple[Mat, Mat]:
    """
    Reorthogonalized CGS with lagged normalization.

    Block k-1 is normalized while block k is projected, so each iteration
    needs a single fused product [Q_{1:k-2} U]^T [U X_k].
    """
    m, n = X.shape
    b = width
    p = n // b
    Q = np.zeros((m, n), order="F")
    R = np.zeros((n, n), order="F")

    def blk(k: int) -> slice:
        return slice(k * b, (k + 1) * b)

    U = X[:, blk(0)].copy(order="F")
    for k in range(1, p):
        Xk = X[:, blk(k)]
        head = (k - 1) * b
        G = gemm(np.hstack([Q[:, :head], U]), np.hstack([U, Xk]), trans_a=True)
        events.record(origin)
        W, Z = G[:head, :b], G[:head, b:]
        gram = G[head:, :b] - gemm(W, W, trans_a=True)
        P = G[head:, b:] - gemm(W, Z, trans_a=True)

        Rprev = cholesky(gram)
        R[blk(k - 1), blk(k - 1)] = Rprev
        R[blk(k - 1), blk(k)] = tri_solve(Rprev, P, side="left", transpose=True)
        if head:
            R[:head, blk(k - 1)] += W
            R[:head, blk(k)] = Z
            U = gemm(Q[:, :head], W, alpha=-1.0, beta=1.0, C=U)
        Q[:, blk(k - 1)] = tri_solve(Rprev, U, side="right")
        U = gemm(Q[:, : k * b], R[: k * b, blk(k)], alpha=-1.0, beta=1.0, C=Xk)

    head = (p - 1) * b
    G = gemm(np.hstack([Q[:, :head], U]), U, trans_a=True)
    events.record(origin)
    W = G[:head]
    Rlast = cholesky(G[head:] - gemm(W, W, trans_a=True))
    if head:
        R[:head, blk(p - 1)] += W
        U = gemm(Q[:, :head], W, alpha=-1.0, beta=1.0, C=U)
    R[blk(p - 1), blk(p - 1)] = Rlast
    Q[:, blk(p - 1)] = tri_solve(Rlast, U, side="right")
    return Q, R


def cwy(
    X: Mat,
    width: int,
    events: EventLog,
    origin: SyncOrigin,
    *,
    inverse: bool,
    final_step: FinalStep | None = None,
) -> tuple[Mat, Mat, Mat]:
    """
    MGS in compact WY (inverse=False) or inverse compact WY (inverse=True) form.

    The projector applied to block k+1 is I - Q T^T Q^T (CWY) or
    I - Q T^{-T} Q^T (ICWY). With final_step=None the last block is
    normalized inside the same fused reduction that completes T; otherwise
    final_step (an intra-orthogonalization) handles it and T keeps the
    identity in its last block column.
    """
    m, n = X.shape
    b = width
    p = n // b
    Q = np.zeros((m, n), order="F")
    R = np.zeros((n, n), order="F")
    T = np.eye(n, order="F")

    def blk(k: int) -> slice:
        return slice(k * b, (k + 1) * b)

    def correction_column(head: int, coupling: Mat) -> Mat:
        if inverse:
            return coupling
        return -gemm(T[:head, :head], coupling)

    U = X[:, blk(0)].copy(order="F")
    for k in range(p - 1):
        Wnext = X[:, blk(k + 1)]
        head = k * b
        G = gemm(np.hstack([Q[:, :head], U]), np.hstack([U, Wnext]), trans_a=True)
        events.record(origin)
        Rkk = cholesky(G[head:, :b])
        if head:
            T[:head, blk(k)] = correction_column(head, tri_solve(Rkk, G[:head, :b], side="right"))
        rhs = np.vstack([G[:head, b:], tri_solve(Rkk, G[head:, b:], side="left", transpose=True)])
        lead = T[: head + b, : head + b]
        if inverse:
            coeffs = tri_solve(lead, rhs, side="left", transpose=True)
        else:
            coeffs = gemm(lead, rhs, trans_a=True)
        R[: head + b, blk(k + 1)] = coeffs
        R[blk(k), blk(k)] = Rkk
        Q[:, blk(k)] = tri_solve(Rkk, U, side="right")
        U = gemm(Q[:, : head + b], coeffs, alpha=-1.0, beta=1.0, C=Wnext)

    head = (p - 1) * b
    if final_step is not None:
        Qlast, Rlast = final_step(U)
    else:
        G = gemm(np.hstack([Q[:, :head], U]), U, trans_a=True)
        events.record(origin)
        # column case: r_ss is the plain norm of u
        Rlast = np.sqrt(G[head:]) if b == 1 else cholesky(G[head:])
        if head:
            T[:head, blk(p - 1)] = correction_column(head, tri_solve(Rlast, G[:head], side="right"))
        Qlast = tri_solve(Rlast, U, side="right")
    R[blk(p - 1), blk(p - 1)] = Rlast
    Q[:, blk(p - 1)] = Qlast
    return Q, R, T
