from dataclasses import dataclass, field
from enum import Enum


class SyncOrigin(str, Enum):
    SKELETON = "skeleton"
    MUSCLE = "muscle"


@dataclass(frozen=True, slots=True)
class SyncEvent:
    origin: SyncOrigin
    kind: str = "global_reduction"


@dataclass(slots=True)
class EventLog:
    """Append-only record of global reductions, one entry per fused tall product."""

    entries: list[SyncEvent] = field(default_factory=list)

    def record(self, origin: SyncOrigin) -> None:
        self.entries.append(SyncEvent(origin))

    def extend(self, other: "EventLog") -> None:
        self.entries.extend(other.entries)

    def count(self, origin: SyncOrigin | None = None) -> int:
        if origin is None:
            return len(self.entries)
        return sum(1 for event in self.entries if event.origin == origin)

    def __len__(self) -> int:
        return len(self.entries)
