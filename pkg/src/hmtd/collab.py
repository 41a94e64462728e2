"""Remote-expert assistance sessions.

The expert opens a session against a running intervention, receives a
context snapshot (bundle, step cursor, recent trace events) and pushes typed
indications that the technician polls in FIFO order. One producer and one
consumer per session; a condition variable lets pollers block until the next
indication arrives.
"""

from __future__ import annotations

import enum
import threading
import time
from dataclasses import dataclass, field

from .context import ContextBundle, Provenance
from .errors import (
    ExpertUnavailable,
    MalformedIndication,
    SessionClosed,
    UnknownSession,
    WrongPhase,
)
from .events import EventKind, Phase, TraceEvent
from .prescription import InterventionSession


class IndicationKind(str, enum.Enum):
    GRAPHICAL = "Graphical"
    ORAL = "Oral"
    TEXTUAL = "Textual"


class GraphicalShape(str, enum.Enum):
    ARROW = "Arrow"
    CIRCLE = "Circle"
    HIGHLIGHT = "Highlight"


@dataclass(frozen=True)
class Indication:
    kind: IndicationKind
    payload: dict
    seq_in_session: int = 0

    def validate(self) -> None:
        p = self.payload
        if self.kind is IndicationKind.GRAPHICAL:
            anchor = p.get("anchor-tag-id")
            if not isinstance(anchor, int) or anchor <= 0:
                raise MalformedIndication("graphical indication needs a positive anchor-tag-id")
            try:
                GraphicalShape(p.get("shape"))
            except ValueError:
                raise MalformedIndication(f"unknown shape: {p.get('shape')!r}") from None
            if not isinstance(p.get("label", ""), str):
                raise MalformedIndication("label must be a string")
        elif self.kind is IndicationKind.ORAL:
            if not isinstance(p.get("transcript"), str) or not p.get("transcript"):
                raise MalformedIndication("oral indication needs a transcript")
            audio = p.get("audio-ref")
            if audio is not None and not isinstance(audio, str):
                raise MalformedIndication("audio-ref must be a string uri")
        elif self.kind is IndicationKind.TEXTUAL:
            if not isinstance(p.get("text"), str) or not p.get("text"):
                raise MalformedIndication("textual indication needs text")
        else:  # pragma: no cover - enum is closed
            raise MalformedIndication(f"unknown kind {self.kind!r}")

    def to_json_dict(self) -> dict:
        return {"seq": self.seq_in_session, "kind": self.kind.value, "payload": dict(self.payload)}


class CollabState(str, enum.Enum):
    OPEN = "Open"
    CLOSED = "Closed"


@dataclass
class Snapshot:
    """What the expert sees when the session opens (refreshable on demand)."""

    bundle: ContextBundle
    provenance: Provenance
    step_cursor: int
    recent_events: list[TraceEvent] = field(default_factory=list)


@dataclass
class CollabSession:
    collab_id: int
    intervention_session_id: int
    expert_id: str
    snapshot: Snapshot
    state: CollabState = CollabState.OPEN
    outbox: list[Indication] = field(default_factory=list)

    def __post_init__(self):
        self._cond = threading.Condition()


class CollabManager:
    """Owns every assistance session and the expert directory."""

    def __init__(self, expert_ids: set[str] | None = None):
        self.experts: set[str] = set(expert_ids or ())
        self._sessions: dict[int, CollabSession] = {}
        self._next_id = 1
        self._lock = threading.Lock()

    def register_expert(self, expert_id: str) -> None:
        self.experts.add(expert_id)

    def open_assistance(
        self,
        intervention: InterventionSession,
        expert_id: str,
        snapshot: Snapshot,
        ledger,
        now: int,
    ) -> CollabSession:
        if intervention.phase is not Phase.IN_PROGRESS:
            raise WrongPhase(
                f"assistance needs an intervention in progress, session is "
                f"{intervention.phase.value}"
            )
        if expert_id not in self.experts:
            raise ExpertUnavailable(f"expert {expert_id!r} is not registered")
        with self._lock:
            collab = CollabSession(
                collab_id=self._next_id,
                intervention_session_id=intervention.session_id,
                expert_id=expert_id,
                snapshot=snapshot,
            )
            self._next_id += 1
            self._sessions[collab.collab_id] = collab
        ledger.append(
            TraceEvent(
                seq=0,
                timestamp=now,
                session_id=intervention.session_id,
                kind=EventKind.ASSISTANCE_REQUESTED,
                operator_badge_id=intervention.operator.badge_id,
                machine_id=intervention.workflow.target_machine_id,
                detail=f"expert={expert_id};collab={collab.collab_id}",
            )
        )
        return collab

    def get(self, collab_id: int) -> CollabSession:
        with self._lock:
            collab = self._sessions.get(collab_id)
        if collab is None:
            raise UnknownSession(f"no assistance session {collab_id}")
        return collab

    def sessions(self) -> list[CollabSession]:
        with self._lock:
            return list(self._sessions.values())

    def send_indication(
        self,
        collab: CollabSession,
        indication: Indication,
        intervention: InterventionSession,
        ledger,
        now: int,
    ) -> int:
        indication.validate()
        with collab._cond:
            if collab.state is not CollabState.OPEN:
                raise SessionClosed(f"assistance session {collab.collab_id} is closed")
            seq = len(collab.outbox) + 1
            collab.outbox.append(
                Indication(indication.kind, dict(indication.payload), seq_in_session=seq)
            )
            collab._cond.notify_all()
        ledger.append(
            TraceEvent(
                seq=0,
                timestamp=now,
                session_id=collab.intervention_session_id,
                kind=EventKind.INDICATION_SENT,
                operator_badge_id=intervention.operator.badge_id,
                machine_id=intervention.workflow.target_machine_id,
                detail=f"kind={indication.kind.value};collab={collab.collab_id};seq={seq}",
            )
        )
        return seq

    def poll_indications(
        self, collab: CollabSession, after_seq: int, wait_seconds: float = 0.0
    ) -> list[Indication]:
        """Indications with seq > after_seq, in send order.

        With ``wait_seconds`` > 0 the call blocks until something newer than
        ``after_seq`` arrives or the timeout lapses (long-poll).
        """
        deadline = time.monotonic() + wait_seconds
        with collab._cond:
            while True:
                pending = [i for i in collab.outbox if i.seq_in_session > after_seq]
                if pending or collab.state is not CollabState.OPEN:
                    return pending
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return pending
                collab._cond.wait(remaining)

    def close(self, collab: CollabSession) -> CollabSession:
        with collab._cond:
            if collab.state is not CollabState.OPEN:
                raise SessionClosed(f"assistance session {collab.collab_id} is already closed")
            collab.state = CollabState.CLOSED
            collab._cond.notify_all()
        return collab
