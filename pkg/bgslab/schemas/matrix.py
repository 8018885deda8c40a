from enum import Enum

from pydantic import BaseModel, ConfigDict, Field

from bgslab.schemas.layout import BlockLayout


class MatrixKind(str, Enum):
    RAND_UNIFORM = "rand_uniform"
    RAND_NORMAL = "rand_normal"
    RANK_DEF = "rank_def"
    LAEUCHLI = "laeuchli"
    MONOMIAL = "monomial"
    S_STEP = "s_step"
    NEWTON = "newton"
    STEWART = "stewart"
    STEWART_EXTREME = "stewart_extreme"
    GLUED = "glued"
    KAPPA_SERIES = "kappa_series"


class MatrixSpec(BaseModel):
    """
    One test matrix: kind, layout, seed and the kind-specific knobs.

    r, t   glued exponents (global and per-block singular value profiles);
           t alone is the kappa_series exponent
    eta    laeuchli override of the random eta
    gen_block
           monomial block width used while building the matrix (defaults to dims.s)
    """

    model_config = ConfigDict(frozen=True)

    kind: MatrixKind
    dims: BlockLayout
    seed: int = 0
    r: float | None = None
    t: float | None = None
    eta: float | None = Field(default=None, gt=0.0)
    gen_block: int | None = Field(default=None, ge=1)

    def label(self) -> str:
        extras = [
            f"{name}={value:g}"
            for name, value in (("r", self.r), ("t", self.t), ("eta", self.eta), ("s_gen", self.gen_block))
            if value is not None
        ]
        return self.kind.value if not extras else f"{self.kind.value}[{';'.join(extras)}]"
