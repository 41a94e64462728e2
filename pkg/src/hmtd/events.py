"""Trace event records and the session-state fold used for replay.

Events are immutable once appended. ``PartReplaced`` events carry the
replacement in ``detail`` as ``"<old>-><new>"`` so both sides of a swap can be
queried and the fold can rebuild the replacements map.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

from .errors import InvalidEvent


class EventKind(str, enum.Enum):
    OPERATOR_AUTHENTICATED = "OperatorAuthenticated"
    INTERVENTION_STARTED = "InterventionStarted"
    TOOL_VALIDATED = "ToolValidated"
    STEP_COMPLETED = "StepCompleted"
    SCAN_REJECTED = "ScanRejected"
    PART_REPLACED = "PartReplaced"
    ASSISTANCE_REQUESTED = "AssistanceRequested"
    INDICATION_SENT = "IndicationSent"
    INTERVENTION_COMPLETED = "InterventionCompleted"
    INTERVENTION_ABORTED = "InterventionAborted"


@dataclass(frozen=True)
class TraceEvent:
    seq: int  # 0 until assigned by the ledger
    timestamp: int  # minutes since 2000-01-01T00:00Z
    session_id: int
    kind: EventKind
    operator_badge_id: int
    machine_id: int
    tool_id: int | None = None
    part_id: int | None = None
    detail: str = ""

    def validate(self) -> None:
        if not isinstance(self.kind, EventKind):
            raise InvalidEvent(f"unknown event kind: {self.kind!r}")
        if self.session_id <= 0:
            raise InvalidEvent("session_id must be positive")
        if self.operator_badge_id <= 0:
            raise InvalidEvent("operator_badge_id must be positive")
        if self.machine_id <= 0:
            raise InvalidEvent("machine_id must be positive")
        if self.kind is EventKind.TOOL_VALIDATED and not self.tool_id:
            raise InvalidEvent("ToolValidated requires tool_id")
        if self.kind is EventKind.STEP_COMPLETED and not self.part_id:
            raise InvalidEvent("StepCompleted requires part_id")
        if self.kind is EventKind.PART_REPLACED:
            if not self.part_id:
                raise InvalidEvent("PartReplaced requires part_id")
            if parse_replacement(self.detail) is None:
                raise InvalidEvent(f"PartReplaced detail must be '<old>-><new>', got {self.detail!r}")

    def to_json_dict(self) -> dict:
        return {
            "seq": self.seq,
            "time": self.timestamp,
            "session-id": self.session_id,
            "kind": self.kind.value,
            "operator-badge-id": self.operator_badge_id,
            "machine-id": self.machine_id,
            "tool-id": self.tool_id,
            "part-id": self.part_id,
            "detail": self.detail,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TraceEvent":
        return cls(
            seq=doc["seq"],
            timestamp=doc["time"],
            session_id=doc["session-id"],
            kind=EventKind(doc["kind"]),
            operator_badge_id=doc["operator-badge-id"],
            machine_id=doc["machine-id"],
            tool_id=doc.get("tool-id"),
            part_id=doc.get("part-id"),
            detail=doc.get("detail", ""),
        )


def parse_replacement(detail: str) -> tuple[int, int] | None:
    """Parse a PartReplaced detail ``"<old>-><new>"``; None when malformed."""
    old, sep, new = detail.partition("->")
    if not sep:
        return None
    try:
        pair = int(old), int(new)
    except ValueError:
        return None
    if pair[0] <= 0 or pair[1] <= 0:
        return None
    return pair


def ledger_digest(events: list[TraceEvent]) -> str:
    """Timestamp-free SHA-256 over the event sequence.

    Excluding timestamps lets a scripted run and an interactive run of the
    same flow produce the same digest even though their clocks tick
    differently.
    """
    h = hashlib.sha256()
    for e in events:
        line = f"{e.seq}|{e.kind.value}|{e.session_id}|{e.operator_badge_id}|{e.machine_id}|{e.tool_id or 0}|{e.part_id or 0}|{e.detail}\n"
        h.update(line.encode("utf-8"))
    return h.hexdigest()


class Phase(str, enum.Enum):
    AWAITING_MACHINE = "AwaitingMachine"
    IN_PROGRESS = "InProgress"
    AWAITING_REPLACEMENT_PART = "AwaitingReplacementPart"
    COMPLETED = "Completed"
    ABORTED = "Aborted"


class ScanSubstate(str, enum.Enum):
    EXPECT_TOOL = "ExpectTool"
    EXPECT_PART = "ExpectPart"


@dataclass
class SessionSummary:
    """The session fields reconstructible from the trace alone."""

    session_id: int
    operator_badge_id: int
    workflow_id: int
    machine_id: int
    phase: Phase
    step_cursor: int
    scan_substate: ScanSubstate
    defect_count: int
    replaced_parts: dict[int, int] = field(default_factory=dict)
    start_time: int | None = None
    end_time: int | None = None


def fold_session(events: list[TraceEvent]) -> SessionSummary:
    """Rebuild a session's final state by folding its events in seq order."""
    if not events:
        raise InvalidEvent("cannot fold an empty event list")
    first = events[0]
    if first.kind is not EventKind.OPERATOR_AUTHENTICATED:
        raise InvalidEvent("session trace must begin with OperatorAuthenticated")
    workflow_id = 0
    for key, _, value in (p.partition("=") for p in first.detail.split(";")):
        if key == "workflow":
            workflow_id = int(value)
    state = SessionSummary(
        session_id=first.session_id,
        operator_badge_id=first.operator_badge_id,
        workflow_id=workflow_id,
        machine_id=first.machine_id,
        phase=Phase.AWAITING_MACHINE,
        step_cursor=0,
        scan_substate=ScanSubstate.EXPECT_TOOL,
        defect_count=0,
    )
    for e in events[1:]:
        if e.kind is EventKind.INTERVENTION_STARTED:
            state.phase = Phase.IN_PROGRESS
            state.start_time = e.timestamp
        elif e.kind is EventKind.TOOL_VALIDATED:
            state.scan_substate = ScanSubstate.EXPECT_PART
        elif e.kind is EventKind.STEP_COMPLETED:
            state.step_cursor += 1
            state.scan_substate = ScanSubstate.EXPECT_TOOL
        elif e.kind is EventKind.PART_REPLACED:
            pair = parse_replacement(e.detail)
            if pair is None:
                raise InvalidEvent(f"unparseable PartReplaced detail: {e.detail!r}")
            state.replaced_parts[pair[0]] = pair[1]
            state.defect_count += 1
        elif e.kind is EventKind.INTERVENTION_COMPLETED:
            state.phase = Phase.COMPLETED
            state.end_time = e.timestamp
        elif e.kind is EventKind.INTERVENTION_ABORTED:
            state.phase = Phase.ABORTED
            state.end_time = e.timestamp
        # ScanRejected, AssistanceRequested and IndicationSent leave the
        # session state untouched.
    return state
