"""Context resolution for a scanned machine: server-backed or tag-only.

Connected, the full machine record comes from the SGDT store (one JSON
document per machine). Disconnected, the bundle is rebuilt from what the tag
itself carries: identity plus the last ten history records. The split is
deliberate: everything the offline bundle contains must be derivable from the
tag, so the two paths agree on their shared fields.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import CorruptTag, ParseError, UnknownMachine
from .prescription import DocAsset, Media
from .tags import HistoryRecord, Outcome, TagKind, TagMemory

LAST_OPERATORS_MAX = 5
TAG_HISTORY_MAX = 10


class Connectivity(str, enum.Enum):
    ONLINE = "Online"
    OFFLINE = "Offline"


class Provenance(str, enum.Enum):
    SERVER = "Server"
    TAG_ONLY = "TagOnly"


@dataclass(frozen=True)
class MachineCharacteristics:
    name: str = ""
    model: str = ""
    location: str = ""


@dataclass(frozen=True)
class Environment:
    machine_id: int
    characteristics: MachineCharacteristics
    history: tuple[HistoryRecord, ...]  # oldest first
    last_operators: tuple[int, ...]  # most recent first, deduplicated


@dataclass(frozen=True)
class ContextBundle:
    environment: Environment
    platform: str  # device-configuration id in use
    preferences: tuple[Media, ...]  # preferred media kinds, ordered


@dataclass(frozen=True)
class SgdtRecord:
    machine_id: int
    characteristics: MachineCharacteristics
    history: tuple[HistoryRecord, ...]  # oldest first, unbounded
    doc_assets: tuple[DocAsset, ...] = ()


def last_operators(history: tuple[HistoryRecord, ...]) -> tuple[int, ...]:
    seen: list[int] = []
    for record in reversed(history):
        if record.operator_badge_id not in seen:
            seen.append(record.operator_badge_id)
        if len(seen) == LAST_OPERATORS_MAX:
            break
    return tuple(seen)


def projection(bundle: ContextBundle, n: int = TAG_HISTORY_MAX) -> ContextBundle:
    """Reduce a server bundle to what a tag-only resolution can know."""
    history = bundle.environment.history[-n:]
    return ContextBundle(
        environment=Environment(
            machine_id=bundle.environment.machine_id,
            characteristics=MachineCharacteristics(),
            history=history,
            last_operators=last_operators(history),
        ),
        platform=bundle.platform,
        preferences=(),
    )


class SgdtStore:
    """Directory of machine records, one ``<machine-id>.json`` each."""

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, machine_id: int) -> Path:
        return self.directory / f"{machine_id}.json"

    def machine_ids(self) -> list[int]:
        return sorted(int(p.stem) for p in self.directory.glob("*.json") if p.stem.isdigit())

    def has(self, machine_id: int) -> bool:
        return self._path(machine_id).exists()

    def get(self, machine_id: int) -> SgdtRecord:
        path = self._path(machine_id)
        if not path.exists():
            raise UnknownMachine(f"machine {machine_id} is not in the SGDT store")
        return record_from_dict(json.loads(path.read_text(encoding="utf-8")), str(path))

    def put(self, record: SgdtRecord) -> None:
        path = self._path(record.machine_id)
        path.write_text(
            json.dumps(record_to_dict(record), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


def resolve(
    machine_tag: TagMemory,
    connectivity: Connectivity,
    store: SgdtStore,
    operator_badge_id: int,
    *,
    platform_id: str = "config-1",
    preferences: dict[int, tuple[Media, ...]] | None = None,
) -> tuple[ContextBundle, Provenance]:
    """Build the intervention context for a machine tag.

    Online, the bundle is served from the SGDT record (full history, operator
    preferences). Offline, it is rebuilt from the tag alone and flagged
    TagOnly.
    """
    ident = machine_tag.read_identity()
    if ident.kind is not TagKind.MACHINE:
        raise CorruptTag(f"context resolution needs a machine tag, got {ident.kind.name.lower()}")
    if connectivity is Connectivity.ONLINE:
        record = store.get(ident.entity_id)
        bundle = ContextBundle(
            environment=Environment(
                machine_id=record.machine_id,
                characteristics=record.characteristics,
                history=record.history,
                last_operators=last_operators(record.history),
            ),
            platform=platform_id,
            preferences=(preferences or {}).get(operator_badge_id, ()),
        )
        return bundle, Provenance.SERVER

    history = tuple(machine_tag.read_history())
    bundle = ContextBundle(
        environment=Environment(
            machine_id=ident.entity_id,
            characteristics=MachineCharacteristics(),
            history=history,
            last_operators=last_operators(history),
        ),
        platform=platform_id,
        preferences=(),
    )
    return bundle, Provenance.TAG_ONLY


def sync_tag(machine_tag: TagMemory, store: SgdtStore) -> SgdtRecord:
    """Merge tag history records the server has not seen (by intervention id).

    Idempotent; merged records land in chronological position. Returns the
    updated record after persisting it.
    """
    ident = machine_tag.read_identity()
    record = store.get(ident.entity_id)
    known = {r.intervention_id for r in record.history}
    missing = [r for r in machine_tag.read_history() if r.intervention_id not in known]
    if not missing:
        return record
    merged = sorted(
        list(record.history) + missing,
        key=lambda r: (r.start_time, r.intervention_id),
    )
    updated = replace(record, history=tuple(merged))
    store.put(updated)
    return updated


# ---------------------------------------------------------------------------
# JSON (de)serialization
# ---------------------------------------------------------------------------


def history_record_from_dict(doc: dict, path: str) -> HistoryRecord:
    try:
        return HistoryRecord(
            intervention_id=doc["intervention-id"],
            operator_badge_id=doc["operator-badge-id"],
            workflow_id=doc["workflow-id"],
            start_time=doc["start-time"],
            end_time=doc["end-time"],
            outcome=Outcome[_outcome_key(doc["outcome"])],
            defect_count=doc.get("defect-count", 0),
            step_count=doc.get("step-count", 0),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"{path}: bad history record: {exc}") from exc


def _outcome_key(name) -> str:
    if isinstance(name, int):
        return Outcome(name).name
    key = str(name).replace("CompletedWithReplacement", "COMPLETED_WITH_REPLACEMENT").upper()
    return key


def history_record_to_dict(r: HistoryRecord) -> dict:
    names = {
        Outcome.COMPLETED: "Completed",
        Outcome.ABORTED: "Aborted",
        Outcome.COMPLETED_WITH_REPLACEMENT: "CompletedWithReplacement",
    }
    return {
        "intervention-id": r.intervention_id,
        "operator-badge-id": r.operator_badge_id,
        "workflow-id": r.workflow_id,
        "start-time": r.start_time,
        "end-time": r.end_time,
        "outcome": names[r.outcome],
        "defect-count": r.defect_count,
        "step-count": r.step_count,
    }


def record_from_dict(doc: dict, path: str = "sgdt") -> SgdtRecord:
    try:
        chars = doc.get("characteristics", {})
        history = tuple(
            history_record_from_dict(h, f"{path}.history[{i}]")
            for i, h in enumerate(doc.get("history", []))
        )
        assets = tuple(
            DocAsset(media=Media(a["media"]), uri=a["uri"], title=a.get("title", ""))
            for a in doc.get("doc-assets", [])
        )
        return SgdtRecord(
            machine_id=doc["machine-id"],
            characteristics=MachineCharacteristics(
                name=chars.get("name", ""),
                model=chars.get("model", ""),
                location=chars.get("location", ""),
            ),
            history=history,
            doc_assets=assets,
        )
    except ParseError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def record_to_dict(record: SgdtRecord) -> dict:
    return {
        "machine-id": record.machine_id,
        "characteristics": {
            "name": record.characteristics.name,
            "model": record.characteristics.model,
            "location": record.characteristics.location,
        },
        "history": [history_record_to_dict(r) for r in record.history],
        "doc-assets": [
            {"media": a.media.value, "uri": a.uri, "title": a.title}
            for a in record.doc_assets
        ],
    }


def bundle_to_dict(bundle: ContextBundle, provenance: Provenance) -> dict:
    env = bundle.environment
    return {
        "environment": {
            "machine-id": env.machine_id,
            "characteristics": {
                "name": env.characteristics.name,
                "model": env.characteristics.model,
                "location": env.characteristics.location,
            },
            "history": [history_record_to_dict(r) for r in env.history],
            "last-operators": list(env.last_operators),
        },
        "platform": {"device-configuration": bundle.platform},
        "preferences": {"preferred-media": [m.value for m in bundle.preferences]},
        "provenance": provenance.value,
    }
