"""Decisions and notices exchanged between the simulator and policies."""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Assignment:
    op_id: str
    pool_id: int


@dataclass(frozen=True)
class Suspension:
    op_id: str


@dataclass
class ScheduleResult:
    suspensions: list = field(default_factory=list)
    assignments: list = field(default_factory=list)


@dataclass(frozen=True)
class FailureNotice:
    pipeline_id: str
    reason: str
    tick: int


@dataclass(frozen=True)
class ViolationEvent:
    tick: int
    kind: str
    op_id: str | None = None
    pool_id: int | None = None
    message: str = ""

    def to_dict(self) -> dict:
        return {"tick": self.tick, "kind": self.kind, "op_id": self.op_id, "pool_id": self.pool_id,
                "message": self.message}
