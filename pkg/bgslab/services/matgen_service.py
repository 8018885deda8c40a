import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from bgslab.core.errors import ParameterError
from bgslab.core.matcore import EPS, Mat, house_qr
from bgslab.schemas.matrix import MatrixKind, MatrixSpec
from bgslab.utils.helpers import make_rng

logger = logging.getLogger(__name__)

# spectrum of the diagonal operator behind the Krylov-type matrices
OPERATOR_SPECTRUM = (0.1, 10.0)

STEWART_DUPLICATE_COLUMN = 25
STEWART_ZERO_COLUMN = 35
GLUED_DEFAULT_EXPONENT = -4.0


@dataclass(slots=True)
class GeneratedMatrix:
    X: Mat
    meta: dict[str, object] = field(default_factory=dict)


def _orthonormal(rng: np.random.Generator, rows: int, cols: int) -> Mat:
    Q, _ = house_qr(rng.standard_normal((rows, cols)))
    return Q


def _svd_product(rng: np.random.Generator, m: int, sigma: np.ndarray) -> Mat:
    n = sigma.size
    U = _orthonormal(rng, m, n)
    V = _orthonormal(rng, n, n)
    return (U * sigma) @ V.T


def _operator_eigenvalues(m: int) -> np.ndarray:
    low, high = OPERATOR_SPECTRUM
    return np.linspace(low, high, m)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def leja_points(candidates: np.ndarray, count: int) -> np.ndarray:
    """Leja ordering: start at the largest modulus, then maximize the product of distances."""
    candidates = np.asarray(candidates, dtype=np.float64)
    if count > candidates.size:
        raise ParameterError(f"cannot pick {count} Leja points from {candidates.size} candidates")
    chosen = [int(np.argmax(np.abs(candidates)))]
    with np.errstate(divide="ignore"):
        log_distance = np.log(np.abs(candidates - candidates[chosen[0]]))
        for _ in range(1, count):
            nxt = int(np.argmax(log_distance))
            chosen.append(nxt)
            log_distance = log_distance + np.log(np.abs(candidates - candidates[nxt]))
    return candidates[chosen]


def _rand_uniform(spec: MatrixSpec, rng: np.random.Generator) -> GeneratedMatrix:
    return GeneratedMatrix(rng.random((spec.dims.m, spec.dims.n)))


def _rand_normal(spec: MatrixSpec, rng: np.random.Generator) -> GeneratedMatrix:
    return GeneratedMatrix(rng.standard_normal((spec.dims.m, spec.dims.n)))


def _rank_def(spec: MatrixSpec, rng: np.random.Generator) -> GeneratedMatrix:
    dims = spec.dims
    if dims.p < 2:
        raise ParameterError("rank_def needs at least two block vectors")
    X = rng.standard_normal((dims.m, dims.n))
    X[:, dims.block(0)] = 100.0 * X[:, dims.block(dims.p - 1)]
    return GeneratedMatrix(X)


def _laeuchli(spec: MatrixSpec, rng: np.random.Generator) -> GeneratedMatrix:
    m, n = spec.dims.m, spec.dims.n
    if m < n + 1:
        raise ParameterError(f"laeuchli needs m >= n + 1, got m={m}, n={n}")
    if spec.eta is not None:
        eta = spec.eta
    else:
        eta = EPS + (math.sqrt(EPS) - EPS) * rng.random()
    X = np.zeros((m, n))
    X[0, :] = 1.0
    X[1 : n + 1, :] = eta * np.eye(n)
    return GeneratedMatrix(X, {"eta": eta})


def _krylov_blocks(
    spec: MatrixSpec,
    rng: np.random.Generator,
    width: int,
    shifts: Callable[[int], np.ndarray],
    restart: Callable[[Mat], np.ndarray],
) -> Mat:
    m, n = spec.dims.m, spec.dims.n
    eig = _operator_eigenvalues(m)
    X = np.zeros((m, n))
    v = _unit(rng.random(m))
    for k in range(n // width):
        block = X[:, k * width : (k + 1) * width]
        block[:, 0] = v
        theta = shifts(k)
        for i in range(1, width):
            block[:, i] = (eig - theta[i - 1]) * block[:, i - 1]
        v = restart(block)
    return X


def _monomial(spec: MatrixSpec, rng: np.random.Generator) -> GeneratedMatrix:
    width = spec.gen_block or spec.dims.s
    if spec.dims.n % width:
        raise ParameterError(f"monomial block width {width} does not divide n={spec.dims.n}")
    zeros = np.zeros(width)
    X = _krylov_blocks(spec, rng, width, lambda k: zeros, lambda block: _unit(rng.random(spec.dims.m)))
    return GeneratedMatrix(X, {"block_width": width})


def _s_step(spec: MatrixSpec, rng: np.random.Generator) -> GeneratedMatrix:
    width = spec.dims.s
    zeros = np.zeros(width)
    X = _krylov_blocks(spec, rng, width, lambda k: zeros, lambda block: _unit(block[:, -1]))
    return GeneratedMatrix(X)


def _newton(spec: MatrixSpec, rng: np.random.Generator) -> GeneratedMatrix:
    dims = spec.dims
    width = dims.s
    per_block = width - 1
    nodes = leja_points(_operator_eigenvalues(dims.m), dims.n)
    X = _krylov_blocks(
        spec,
        rng,
        width,
        lambda k: nodes[k * per_block : (k + 1) * per_block],
        lambda block: _unit(block[:, -1]),
    )
    used = nodes[: dims.p * per_block]
    return GeneratedMatrix(X, {"shifts": [float(theta) for theta in used]})


def stewart_indices(n: int) -> tuple[int, int, bool]:
    """1-based (duplicate-of-column-1, zero column, scaled) for an n-column stewart matrix."""
    if n >= STEWART_ZERO_COLUMN:
        return STEWART_DUPLICATE_COLUMN, STEWART_ZERO_COLUMN, False
    if n < 3:
        raise ParameterError(f"stewart needs at least 3 columns, got {n}")
    return math.ceil(n / 2), math.ceil(7 * n / 10), True


def _stewart(spec: MatrixSpec, rng: np.random.Generator) -> GeneratedMatrix:
    m, n = spec.dims.m, spec.dims.n
    duplicate, zero, scaled = stewart_indices(n)
    X = _svd_product(rng, m, np.geomspace(1.0, 1e-20, n))
    X[:, duplicate - 1] = X[:, 0]
    X[:, zero - 1] = 0.0
    if scaled:
        logger.info("stewart: n=%s < %s, structural columns scaled to %s and %s", n, STEWART_ZERO_COLUMN, duplicate, zero)
    return GeneratedMatrix(X, {"duplicate_of_first": duplicate, "zero_column": zero, "scaled_indices": scaled})


def _stewart_extreme(spec: MatrixSpec, rng: np.random.Generator) -> GeneratedMatrix:
    m, n = spec.dims.m, spec.dims.n
    half = math.ceil(n / 2)
    sigma = np.zeros(n)
    sigma[:half] = np.geomspace(1.0, 1e-10, half)
    return GeneratedMatrix(_svd_product(rng, m, sigma), {"nonzero_singular_values": half})


def _glued(spec: MatrixSpec, rng: np.random.Generator) -> GeneratedMatrix:
    dims = spec.dims
    r = GLUED_DEFAULT_EXPONENT if spec.r is None else spec.r
    t = GLUED_DEFAULT_EXPONENT if spec.t is None else spec.t
    X = _svd_product(rng, dims.m, np.logspace(0.0, r, dims.n))
    block_scale = np.logspace(0.0, t, dims.s)
    Vb = _orthonormal(rng, dims.s, dims.s)
    glue = block_scale[:, None] * Vb.T
    for k in range(dims.p):
        X[:, dims.block(k)] = X[:, dims.block(k)] @ glue
    return GeneratedMatrix(X, {"r": r, "t": t})


def _kappa_series(spec: MatrixSpec, rng: np.random.Generator) -> GeneratedMatrix:
    t = 0.0 if spec.t is None else spec.t
    X = _svd_product(rng, spec.dims.m, np.logspace(0.0, -t, spec.dims.n))
    return GeneratedMatrix(X, {"t": t})


_GENERATORS: dict[MatrixKind, Callable[[MatrixSpec, np.random.Generator], GeneratedMatrix]] = {
    MatrixKind.RAND_UNIFORM: _rand_uniform,
    MatrixKind.RAND_NORMAL: _rand_normal,
    MatrixKind.RANK_DEF: _rank_def,
    MatrixKind.LAEUCHLI: _laeuchli,
    MatrixKind.MONOMIAL: _monomial,
    MatrixKind.S_STEP: _s_step,
    MatrixKind.NEWTON: _newton,
    MatrixKind.STEWART: _stewart,
    MatrixKind.STEWART_EXTREME: _stewart_extreme,
    MatrixKind.GLUED: _glued,
    MatrixKind.KAPPA_SERIES: _kappa_series,
}


def generate_with_meta(spec: MatrixSpec) -> GeneratedMatrix:
    rng = make_rng(spec.seed)
    generated = _GENERATORS[spec.kind](spec, rng)
    generated.X = np.asfortranarray(generated.X, dtype=np.float64)
    generated.meta = {"kind": spec.kind.value, "seed": spec.seed, **generated.meta}
    return generated


def generate(spec: MatrixSpec) -> Mat:
    return generate_with_meta(spec).X
