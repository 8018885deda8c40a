from enum import Enum
from typing import TypeVar


class MuscleId(str, Enum):
    CGS = "CGS"
    CGS_P = "CGS_P"
    CGS_RO = "CGS_RO"
    CGS_IRO = "CGS_IRO"
    CGS_SRO = "CGS_SRO"
    CGS_SROR = "CGS_SROR"
    CGS_IRO_LS = "CGS_IRO_LS"
    MGS = "MGS"
    MGS_RO = "MGS_RO"
    MGS_IRO = "MGS_IRO"
    MGS_SVL = "MGS_SVL"
    MGS_LTS = "MGS_LTS"
    MGS_CWY = "MGS_CWY"
    MGS_ICWY = "MGS_ICWY"
    HOUSE_QR = "HouseQR"
    CHOL_QR = "CholQR"
    CHOL_QR_RO = "CholQR_RO"
    SH_CHOL_QR_RORO = "ShCholQR_RORO"


class SkeletonId(str, Enum):
    BCGS = "BCGS"
    BCGS_PIP = "BCGS_PIP"
    BCGS_PIO = "BCGS_PIO"
    BCGS_RO = "BCGS_RO"
    BCGS_IRO = "BCGS_IRO"
    BCGS_IRO_LS = "BCGS_IRO_LS"
    BCGS_SROR = "BCGS_SROR"
    BMGS = "BMGS"
    BMGS_SVL = "BMGS_SVL"
    BMGS_LTS = "BMGS_LTS"
    BMGS_CWY = "BMGS_CWY"
    BMGS_ICWY = "BMGS_ICWY"


class RunStatus(str, Enum):
    OK = "ok"
    CHOL_FAIL = "chol_fail"
    NAN_ENCOUNTERED = "nan_encountered"


class CellStatus(str, Enum):
    OK = "ok"
    INCOMPATIBLE = "incompatible"
    CHOL_FAIL = "chol_fail"
    NAN_ENCOUNTERED = "nan_encountered"

    @classmethod
    def from_run(cls, status: RunStatus) -> "CellStatus":
        return cls(status.value)


T_PRODUCING_MUSCLES = frozenset(
    {MuscleId.MGS_SVL, MuscleId.MGS_LTS, MuscleId.MGS_CWY, MuscleId.MGS_ICWY}
)
T_PRODUCING_SKELETONS = frozenset(
    {SkeletonId.BMGS_SVL, SkeletonId.BMGS_LTS, SkeletonId.BMGS_CWY, SkeletonId.BMGS_ICWY}
)

# T of these variants approximates triu(Q^T Q); the correction is its inverse.
INVERSE_FORM_VARIANTS = frozenset(
    {MuscleId.MGS_LTS, MuscleId.MGS_ICWY, SkeletonId.BMGS_LTS, SkeletonId.BMGS_ICWY}
)

SROR_MUSCLES = frozenset({MuscleId.CGS_SRO, MuscleId.CGS_SROR})

E = TypeVar("E", bound=Enum)


def _canonical(name: str) -> str:
    return "".join(ch for ch in name.strip().upper() if ch not in "_- ")


def parse_enum(enum_cls: type[E], name: str | E) -> E:
    """Match an enum member by value or name, ignoring case, '_' and '-'."""
    if isinstance(name, enum_cls):
        return name
    wanted = _canonical(str(name))
    for member in enum_cls:
        if wanted in (_canonical(member.value), _canonical(member.name)):
            return member
    raise ValueError(f"invalid {enum_cls.__name__} name: {name!r}")


def enum_rank(member: Enum) -> int:
    """Declaration order, used to sort result rows."""
    return list(type(member)).index(member)
