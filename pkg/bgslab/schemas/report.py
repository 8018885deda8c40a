from pydantic import BaseModel, field_serializer

from bgslab.schemas.variants import CellStatus, MuscleId, SkeletonId
from bgslab.utils.helpers import encode_float


def _encode(value: float | None) -> float | str | None:
    if value is None:
        return None
    text = encode_float(value)
    return text if text in ("NaN", "Inf", "-Inf") else float(value)


class TriadReport(BaseModel):
    res_ts: float
    res_qr: float
    res_tr: float

    @field_serializer("res_ts", "res_qr", "res_tr")
    def serialize_value(self, value: float):
        return _encode(value)


class StabilityReport(BaseModel):
    loo: float
    rel_res: float
    rel_chol_res: float
    triad: TriadReport | None = None
    kappa: float
    sync_skeleton: int
    sync_muscle: int
    status: CellStatus
    seed: int

    @field_serializer("loo", "rel_res", "rel_chol_res", "kappa")
    def serialize_value(self, value: float):
        return _encode(value)


class CellRecord(BaseModel):
    """One evaluated (matrix, skeleton, muscle) cell."""

    variant: str
    matrix: str
    skeleton: SkeletonId | None
    muscle: MuscleId
    report: StabilityReport
    reason: str | None = None

    @property
    def status(self) -> CellStatus:
        return self.report.status
