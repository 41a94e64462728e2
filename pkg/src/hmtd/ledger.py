"""Append-only trace ledger backed by a single binary log file.

On-disk framing, one record per event:

    u32 BE payload length | payload (UTF-8 JSON) | u32 BE CRC-32 of payload

Appends are linearized behind a lock and fsynced before returning. On open,
the file is scanned to rebuild the in-memory indices; a torn or corrupt tail
(from a crash mid-write) is detected and truncated away so the log is always
a readable prefix.
"""

from __future__ import annotations

import json
import os
import struct
import threading
import zlib
from pathlib import Path

from .errors import InvalidEvent, StorageFailure, UnknownSession
from .events import (
    EventKind,
    SessionSummary,
    TraceEvent,
    fold_session,
    ledger_digest,
    parse_replacement,
)

_LEN = struct.Struct(">I")
_MAX_PAYLOAD = 1 << 20


def _frame(payload: bytes) -> bytes:
    return _LEN.pack(len(payload)) + payload + _LEN.pack(zlib.crc32(payload) & 0xFFFFFFFF)


def read_log_file(path: Path | str) -> tuple[list[TraceEvent], int]:
    """Parse ``trace.log``; returns (events, length of the valid prefix)."""
    raw = Path(path).read_bytes()
    events: list[TraceEvent] = []
    pos = 0
    while True:
        if pos + 4 > len(raw):
            break
        (length,) = _LEN.unpack_from(raw, pos)
        end = pos + 4 + length + 4
        if length > _MAX_PAYLOAD or end > len(raw):
            break
        payload = raw[pos + 4 : pos + 4 + length]
        (crc,) = _LEN.unpack_from(raw, pos + 4 + length)
        if crc != (zlib.crc32(payload) & 0xFFFFFFFF):
            break
        try:
            event = TraceEvent.from_json_dict(json.loads(payload.decode("utf-8")))
        except (ValueError, KeyError):
            break
        if event.seq != len(events) + 1:
            break
        events.append(event)
        pos = end
    return events, pos


class TraceLedger:
    """Durable, linearizable event log with per-part/tool/session indices."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._events: list[TraceEvent] = []
        self._by_part: dict[int, list[int]] = {}
        self._by_tool: dict[int, list[int]] = {}
        self._by_session: dict[int, list[int]] = {}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            events, valid_len = read_log_file(self.path)
            if valid_len < self.path.stat().st_size:
                with open(self.path, "r+b") as fh:
                    fh.truncate(valid_len)
            for event in events:
                self._events.append(event)
                self._index(event)
        self._fh = open(self.path, "ab")

    def close(self) -> None:
        with self._lock:
            self._fh.close()

    # -- writes ---------------------------------------------------------------

    def append(self, event: TraceEvent) -> int:
        """Assign the next seq, persist the event, and return its seq."""
        event.validate()
        with self._lock:
            seq = len(self._events) + 1
            stamped = TraceEvent(
                seq=seq,
                timestamp=event.timestamp,
                session_id=event.session_id,
                kind=event.kind,
                operator_badge_id=event.operator_badge_id,
                machine_id=event.machine_id,
                tool_id=event.tool_id,
                part_id=event.part_id,
                detail=event.detail,
            )
            payload = json.dumps(
                stamped.to_json_dict(), sort_keys=True, separators=(",", ":")
            ).encode("utf-8")
            try:
                self._fh.write(_frame(payload))
                self._fh.flush()
                os.fsync(self._fh.fileno())
            except OSError as exc:
                raise StorageFailure(f"cannot append to {self.path}: {exc}") from exc
            self._events.append(stamped)
            self._index(stamped)
            return seq

    def _index(self, event: TraceEvent) -> None:
        i = event.seq - 1
        self._by_session.setdefault(event.session_id, []).append(i)
        if event.tool_id:
            self._by_tool.setdefault(event.tool_id, []).append(i)
        if event.part_id:
            self._by_part.setdefault(event.part_id, []).append(i)
        if event.kind is EventKind.PART_REPLACED and event.detail:
            pair = parse_replacement(event.detail)
            if pair and pair[1] != event.part_id:
                self._by_part.setdefault(pair[1], []).append(i)

    # -- queries ----------------------------------------------------------------

    def __len__(self) -> int:
        with self._lock:
            return len(self._events)

    def all_events(self) -> list[TraceEvent]:
        with self._lock:
            return list(self._events)

    def tail(self, n: int) -> list[TraceEvent]:
        with self._lock:
            return list(self._events[-n:]) if n > 0 else []

    def part_history(self, part_id: int) -> list[TraceEvent]:
        """Events touching a part, ascending seq; replacements match both ids."""
        with self._lock:
            return [self._events[i] for i in self._by_part.get(part_id, [])]

    def tool_usage(self, tool_id: int) -> list[TraceEvent]:
        with self._lock:
            return [self._events[i] for i in self._by_tool.get(tool_id, [])]

    def session_events(self, session_id: int) -> list[TraceEvent]:
        with self._lock:
            return [self._events[i] for i in self._by_session.get(session_id, [])]

    def session_ids(self) -> list[int]:
        with self._lock:
            return sorted(self._by_session)

    def replay(self, session_id: int) -> SessionSummary:
        """Fold a session's events into its reconstructed final state."""
        events = self.session_events(session_id)
        if not events:
            raise UnknownSession(f"no events for session {session_id}")
        try:
            return fold_session(events)
        except InvalidEvent as exc:
            raise StorageFailure(f"session {session_id} trace is not foldable: {exc}") from exc

    def digest(self) -> str:
        return ledger_digest(self.all_events())
