from dataclasses import dataclass, field

import numpy as np

from bgslab.core.events import EventLog
from bgslab.core.matcore import Mat
from bgslab.schemas.variants import RunStatus


@dataclass(slots=True)
class QRResult:
    """Factors of one intra-orthogonalization; T is the identity unless the muscle builds one."""

    Q: Mat
    R: Mat
    T: Mat
    status: RunStatus = RunStatus.OK
    events: EventLog = field(default_factory=EventLog)

    @property
    def ok(self) -> bool:
        return self.status is RunStatus.OK

    @classmethod
    def failed(cls, rows: int, cols: int, status: RunStatus, events: EventLog) -> "QRResult":
        nan = np.full((rows, cols), np.nan, order="F")
        return cls(
            Q=nan,
            R=np.full((cols, cols), np.nan, order="F"),
            T=np.eye(cols, order="F"),
            status=status,
            events=events,
        )


@dataclass(slots=True)
class BlockQRResult:
    """Block factorization X = QR with an optional block correction factor T."""

    Q: Mat
    R: Mat
    T: Mat
    status: RunStatus = RunStatus.OK
    events: EventLog = field(default_factory=EventLog)

    @property
    def ok(self) -> bool:
        return self.status is RunStatus.OK
