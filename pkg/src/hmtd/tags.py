"""Simulated RFID tag memories with a bit-exact 256-octet layout.

Layout (all multi-octet integers big-endian):

    offset  size  field
    0       2     magic 0x48 0x54
    2       1     format version (0x01)
    3       1     entity kind code
    4       4     entity id (u32)
    8       1     history record count (0..10)
    9       1     ring head index (slot of the oldest record)
    10      1     status flags (bit 0 = part marked defective)
    11      1     zero
    12      240   ten 24-octet history slots
    252     4     CRC-32 of octets 0..251 (IEEE polynomial, reflected,
                  init 0xFFFFFFFF, final xor 0xFFFFFFFF)

Only machine tags carry history records; part, tool and badge tags hold
identity and flags. Every operation is a pure value transformation returning
a fresh tag.
"""

from __future__ import annotations

import enum
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

from .errors import CorruptTag, WrongKind

TAG_SIZE = 256
MAGIC = b"\x48\x54"
VERSION = 0x01
SLOT_BASE = 12
SLOT_SIZE = 24
SLOT_COUNT = (252 - SLOT_BASE) // SLOT_SIZE  # 10
CRC_OFFSET = 252

DEFECT_BIT = 0x01

_RECORD_FMT = ">IIHIIBBH2s"
assert struct.calcsize(_RECORD_FMT) == SLOT_SIZE


class TagKind(enum.IntEnum):
    MACHINE = 0x01
    PART = 0x02
    TOOL = 0x03
    BADGE = 0x04


class Outcome(enum.IntEnum):
    COMPLETED = 0x00
    ABORTED = 0x01
    COMPLETED_WITH_REPLACEMENT = 0x02


@dataclass(frozen=True)
class TagIdentity:
    kind: TagKind
    entity_id: int

    def __post_init__(self):
        if not isinstance(self.kind, TagKind):
            object.__setattr__(self, "kind", TagKind(self.kind))
        if not 0 < self.entity_id <= 0xFFFFFFFF:
            raise ValueError(f"entity id out of range: {self.entity_id}")

    @property
    def persisted_id(self) -> str:
        return f"{self.kind.name.lower()}-{self.entity_id}"


@dataclass(frozen=True)
class HistoryRecord:
    """One maintenance intervention, as stored in a 24-octet tag slot."""

    intervention_id: int
    operator_badge_id: int
    workflow_id: int
    start_time: int  # minutes since 2000-01-01T00:00Z
    end_time: int
    outcome: Outcome
    defect_count: int
    step_count: int

    def __post_init__(self):
        if not isinstance(self.outcome, Outcome):
            object.__setattr__(self, "outcome", Outcome(self.outcome))
        for name, value, limit in (
            ("intervention_id", self.intervention_id, 0xFFFFFFFF),
            ("operator_badge_id", self.operator_badge_id, 0xFFFFFFFF),
            ("workflow_id", self.workflow_id, 0xFFFF),
            ("start_time", self.start_time, 0xFFFFFFFF),
            ("end_time", self.end_time, 0xFFFFFFFF),
            ("defect_count", self.defect_count, 0xFF),
            ("step_count", self.step_count, 0xFFFF),
        ):
            if not 0 <= value <= limit:
                raise ValueError(f"{name} out of range: {value}")
        if self.end_time < self.start_time:
            raise ValueError("end_time precedes start_time")

    def encode(self) -> bytes:
        return struct.pack(
            _RECORD_FMT,
            self.intervention_id,
            self.operator_badge_id,
            self.workflow_id,
            self.start_time,
            self.end_time,
            int(self.outcome),
            self.defect_count,
            self.step_count,
            b"\x00\x00",
        )

    @classmethod
    def decode(cls, raw: bytes) -> "HistoryRecord":
        if len(raw) != SLOT_SIZE:
            raise ValueError(f"record must be {SLOT_SIZE} octets, got {len(raw)}")
        (iid, badge, wf, start, end, outcome, defects, steps, reserved) = struct.unpack(
            _RECORD_FMT, raw
        )
        if reserved != b"\x00\x00":
            raise ValueError("reserved octets must be zero")
        return cls(iid, badge, wf, start, end, Outcome(outcome), defects, steps)


def _crc(payload: bytes) -> int:
    return zlib.crc32(payload) & 0xFFFFFFFF


def _seal(body: bytearray) -> "TagMemory":
    struct.pack_into(">I", body, CRC_OFFSET, _crc(bytes(body[:CRC_OFFSET])))
    return TagMemory(bytes(body))


@dataclass(frozen=True)
class TagMemory:
    """An immutable 256-octet tag image."""

    data: bytes

    def __post_init__(self):
        if len(self.data) != TAG_SIZE:
            raise ValueError(f"tag must be {TAG_SIZE} octets, got {len(self.data)}")

    # -- integrity / header ------------------------------------------------

    def check(self) -> None:
        """Raise CorruptTag unless magic, version and CRC are intact."""
        if self.data[:2] != MAGIC or self.data[2] != VERSION:
            raise CorruptTag("bad magic or version")
        (stored,) = struct.unpack_from(">I", self.data, CRC_OFFSET)
        if stored != _crc(self.data[:CRC_OFFSET]):
            raise CorruptTag("checksum mismatch")

    @property
    def identity(self) -> TagIdentity:
        return self.read_identity()

    def read_identity(self) -> TagIdentity:
        self.check()
        try:
            kind = TagKind(self.data[3])
        except ValueError as exc:
            raise CorruptTag(f"unknown tag kind code 0x{self.data[3]:02x}") from exc
        (entity_id,) = struct.unpack_from(">I", self.data, 4)
        return TagIdentity(kind, entity_id)

    @property
    def persisted_id(self) -> str:
        return self.read_identity().persisted_id

    @property
    def record_count(self) -> int:
        return self.data[8]

    @property
    def head_index(self) -> int:
        return self.data[9]

    @property
    def status_flags(self) -> int:
        return self.data[10]

    @property
    def defective(self) -> bool:
        return bool(self.data[10] & DEFECT_BIT)

    # -- operations ---------------------------------------------------------

    def append_history(self, record: HistoryRecord) -> "TagMemory":
        """Write one history record, evicting the oldest once all slots fill."""
        ident = self.read_identity()
        if ident.kind is not TagKind.MACHINE:
            raise WrongKind(f"history lives on machine tags, not {ident.kind.name.lower()} tags")
        body = bytearray(self.data)
        count, head = body[8], body[9]
        if count < SLOT_COUNT:
            slot = (head + count) % SLOT_COUNT
            body[8] = count + 1
        else:
            slot = head
            body[9] = (head + 1) % SLOT_COUNT
        off = SLOT_BASE + slot * SLOT_SIZE
        body[off : off + SLOT_SIZE] = record.encode()
        return _seal(body)

    def read_history(self) -> list[HistoryRecord]:
        """Return stored records oldest-first."""
        ident = self.read_identity()
        if ident.kind is not TagKind.MACHINE:
            raise WrongKind(f"history lives on machine tags, not {ident.kind.name.lower()} tags")
        count, head = self.data[8], self.data[9]
        records = []
        for i in range(count):
            slot = (head + i) % SLOT_COUNT
            off = SLOT_BASE + slot * SLOT_SIZE
            records.append(HistoryRecord.decode(self.data[off : off + SLOT_SIZE]))
        return records

    def set_defect_flag(self, defective: bool) -> "TagMemory":
        ident = self.read_identity()
        if ident.kind is not TagKind.PART:
            raise WrongKind(f"defect flag lives on part tags, not {ident.kind.name.lower()} tags")
        body = bytearray(self.data)
        if defective:
            body[10] |= DEFECT_BIT
        else:
            body[10] &= ~DEFECT_BIT & 0xFF
        return _seal(body)

    # -- persistence ----------------------------------------------------------

    def save(self, directory: Path | str) -> Path:
        """Write the snapshot file ``<kind>-<entity-id>.tag`` under ``directory``."""
        path = Path(directory) / f"{self.persisted_id}.tag"
        path.write_bytes(self.data)
        return path


def init_tag(identity: TagIdentity) -> TagMemory:
    body = bytearray(TAG_SIZE)
    body[0:2] = MAGIC
    body[2] = VERSION
    body[3] = int(identity.kind)
    struct.pack_into(">I", body, 4, identity.entity_id)
    return _seal(body)


def load_tag(path: Path | str) -> TagMemory:
    raw = Path(path).read_bytes()
    if len(raw) != TAG_SIZE:
        raise CorruptTag(f"tag file must be {TAG_SIZE} octets, got {len(raw)}")
    tag = TagMemory(raw)
    tag.check()
    return tag


def tag_path(directory: Path | str, kind: TagKind, entity_id: int) -> Path:
    return Path(directory) / f"{TagIdentity(kind, entity_id).persisted_id}.tag"
