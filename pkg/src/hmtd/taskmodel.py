"""Task trees, device-configuration derivation, and interaction-model scoring.

Three analyses live here:

* CTT-style task trees whose interaction leaves declare the input/output
  modalities they need;
* derivation of minimal, conflict-free device configurations covering a
  tree's modality needs by exhaustive subset search over a small referential;
* IRVO-style interaction models (users, real/virtual tools and objects,
  sensor and effector transducers, fusion frames) with structural validation
  and a perceptual-continuity score: the number of distinct information
  sources the user must attend to, where a fusion frame merges its members
  into one source.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidModel, ParseError, UncoverableNeed


class Modality(str, enum.Enum):
    VISUAL_OUT = "VisualOut"
    AUDIO_OUT = "AudioOut"
    AUDIO_IN = "AudioIn"
    TAG_IN = "TagIn"
    SELECT_IN = "SelectIn"
    TEXT_IN = "TextIn"


class TaskCategory(str, enum.Enum):
    ABSTRACTION = "Abstraction"
    USER = "User"
    INTERACTION = "Interaction"
    APPLICATION = "Application"


class TemporalOperator(str, enum.Enum):
    ENABLING = "Enabling"
    ENABLING_WITH_INFO = "EnablingWithInfo"
    CONCURRENT = "Concurrent"
    CHOICE = "Choice"
    DISABLING = "Disabling"


@dataclass(frozen=True)
class CttNode:
    name: str
    category: TaskCategory
    operator_to_next: TemporalOperator | None = None
    children: tuple["CttNode", ...] = ()
    modality_needs: frozenset[Modality] = frozenset()

    def leaves(self) -> list["CttNode"]:
        if not self.children:
            return [self]
        out: list[CttNode] = []
        for child in self.children:
            out.extend(child.leaves())
        return out

    def needs(self) -> frozenset[Modality]:
        """Union of the tree's leaf modality needs."""
        acc: set[Modality] = set()
        for leaf in self.leaves():
            acc |= leaf.modality_needs
        return frozenset(acc)


@dataclass(frozen=True)
class DeviceDescriptor:
    device_id: str
    provides: frozenset[Modality]
    exclusive_with: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.provides:
            raise ValueError(f"device {self.device_id!r} provides nothing")


@dataclass(frozen=True)
class DeviceConfiguration:
    devices: tuple[str, ...]  # sorted device ids
    covered_needs: frozenset[Modality]


def derive_configurations(
    tree: CttNode, referential: list[DeviceDescriptor]
) -> list[DeviceConfiguration]:
    """All minimal conflict-free device sets covering the tree's needs.

    Exhaustive subset enumeration; referentials stay small (≤ ~10 devices).
    Results are ordered by (size, device ids).
    """
    needs = tree.needs()
    providers: dict[Modality, list[DeviceDescriptor]] = {m: [] for m in needs}
    for dev in referential:
        for m in needs & dev.provides:
            providers[m].append(dev)
    for m in sorted(needs, key=lambda m: m.value):
        if not providers[m]:
            raise UncoverableNeed(f"no device provides {m.value}")

    by_id = {d.device_id: d for d in referential}
    covers: list[frozenset[str]] = []
    ids = sorted(by_id)
    for r in range(len(ids) + 1):
        for combo in itertools.combinations(ids, r):
            chosen = [by_id[i] for i in combo]
            provided: set[Modality] = set()
            for d in chosen:
                provided |= d.provides
            if not needs <= provided:
                continue
            if any(
                other in d.exclusive_with for d in chosen for other in combo
            ):
                continue
            covers.append(frozenset(combo))

    minimal = [c for c in covers if not any(other < c for other in covers)]
    configs = [
        DeviceConfiguration(
            devices=tuple(sorted(c)),
            covered_needs=frozenset().union(*(by_id[i].provides for i in c))
            if c
            else frozenset(),
        )
        for c in minimal
    ]
    configs.sort(key=lambda cfg: (len(cfg.devices), cfg.devices))
    return configs


# ---------------------------------------------------------------------------
# IRVO models
# ---------------------------------------------------------------------------


class EntityKind(str, enum.Enum):
    USER = "User"
    REAL_TOOL = "RealTool"
    VIRTUAL_TOOL = "VirtualTool"
    REAL_OBJECT = "RealObject"
    VIRTUAL_OBJECT = "VirtualObject"
    SENSOR = "Sensor"
    EFFECTOR = "Effector"


REAL_SIDE = {EntityKind.USER, EntityKind.REAL_TOOL, EntityKind.REAL_OBJECT}
VIRTUAL_SIDE = {EntityKind.VIRTUAL_TOOL, EntityKind.VIRTUAL_OBJECT}
PERCEIVABLE = REAL_SIDE | VIRTUAL_SIDE


class Channel(str, enum.Enum):
    VISUAL = "Visual"
    AUDIO = "Audio"
    HAPTIC = "Haptic"
    ACTION = "Action"
    DATA = "Data"


PERCEPTUAL_CHANNELS = {Channel.VISUAL, Channel.AUDIO}


@dataclass(frozen=True)
class Entity:
    entity_id: str
    kind: EntityKind
    label: str = ""


@dataclass(frozen=True)
class Arrow:
    from_id: str
    to_id: str
    channel: Channel


@dataclass(frozen=True)
class IrvoModel:
    entities: tuple[Entity, ...]
    arrows: tuple[Arrow, ...]
    fusion_frames: tuple[frozenset[str], ...] = ()

    def entity_map(self) -> dict[str, Entity]:
        return {e.entity_id: e for e in self.entities}


@dataclass(frozen=True)
class Violation:
    code: str
    subjects: tuple[str, ...]
    message: str


def validate_irvo(model: IrvoModel) -> list[Violation]:
    """Structural checks; an empty list means the model is well formed."""
    violations: list[Violation] = []
    by_id: dict[str, Entity] = {}
    for e in model.entities:
        if e.entity_id in by_id:
            violations.append(
                Violation("duplicate-entity", (e.entity_id,), f"entity id {e.entity_id!r} reused")
            )
        by_id[e.entity_id] = e

    for a in model.arrows:
        missing = [i for i in (a.from_id, a.to_id) if i not in by_id]
        if missing:
            violations.append(
                Violation(
                    "dangling-arrow",
                    (a.from_id, a.to_id),
                    f"arrow {a.from_id}->{a.to_id} references unknown entity "
                    f"{', '.join(missing)}",
                )
            )
            continue
        src, dst = by_id[a.from_id], by_id[a.to_id]
        if src.kind is EntityKind.SENSOR and dst.kind not in VIRTUAL_SIDE:
            violations.append(
                Violation(
                    "sensor-direction",
                    (a.from_id, a.to_id),
                    f"sensor {a.from_id} must feed the virtual side, not {dst.kind.value}",
                )
            )
        if dst.kind is EntityKind.SENSOR and src.kind not in REAL_SIDE:
            violations.append(
                Violation(
                    "sensor-direction",
                    (a.from_id, a.to_id),
                    f"sensor {a.to_id} must sense the real side, not {src.kind.value}",
                )
            )
        if src.kind is EntityKind.EFFECTOR and dst.kind not in REAL_SIDE:
            violations.append(
                Violation(
                    "effector-direction",
                    (a.from_id, a.to_id),
                    f"effector {a.from_id} must act on the real side, not {dst.kind.value}",
                )
            )
        if dst.kind is EntityKind.EFFECTOR and src.kind not in VIRTUAL_SIDE:
            violations.append(
                Violation(
                    "effector-direction",
                    (a.from_id, a.to_id),
                    f"effector {a.to_id} must be driven from the virtual side, "
                    f"not {src.kind.value}",
                )
            )

    for i, frame in enumerate(model.fusion_frames):
        unknown = [m for m in sorted(frame) if m not in by_id]
        if unknown:
            violations.append(
                Violation(
                    "frame-unknown-entity",
                    tuple(sorted(frame)),
                    f"fusion frame {i} references unknown entities {', '.join(unknown)}",
                )
            )
            continue
        perceivable = [m for m in sorted(frame) if by_id[m].kind in PERCEIVABLE]
        if len(perceivable) < 2:
            violations.append(
                Violation(
                    "frame-too-small",
                    tuple(sorted(frame)),
                    f"fusion frame {i} needs at least 2 perceivable entities",
                )
            )
    return violations


def continuity_score(model: IrvoModel) -> int:
    """Distinct perception sources the user must attend to.

    Counts entities with a Visual or Audio arrow into a user; all members of
    one fusion frame (transitively, for chained frames) count once.
    """
    problems = validate_irvo(model)
    if problems:
        raise InvalidModel(
            "model has structural violations: " + "; ".join(v.message for v in problems)
        )
    by_id = model.entity_map()
    users = {e.entity_id for e in model.entities if e.kind is EntityKind.USER}
    sources = {
        a.from_id
        for a in model.arrows
        if a.to_id in users
        and a.channel in PERCEPTUAL_CHANNELS
        and by_id[a.from_id].kind in PERCEIVABLE
    }

    parent: dict[str, str] = {e.entity_id: e.entity_id for e in model.entities}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for frame in model.fusion_frames:
        members = sorted(frame)
        for a, b in zip(members, members[1:]):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb

    return len({find(s) for s in sources})


# ---------------------------------------------------------------------------
# Documents (UTF-8 JSON)
# ---------------------------------------------------------------------------


def _need_field(doc: dict, key: str, path: str):
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected an object")
    if key not in doc:
        raise ParseError(f"{path}: missing field {key!r}")
    return doc[key]


def _ctt_from_dict(doc: dict, path: str, is_last_sibling: bool) -> CttNode:
    name = _need_field(doc, "name", path)
    try:
        category = TaskCategory(_need_field(doc, "category", path))
    except ValueError as exc:
        raise ParseError(f"{path}.category: {exc}") from exc
    op = doc.get("operator-to-next")
    if op is not None:
        if is_last_sibling:
            raise ParseError(f"{path}: operator-to-next set on a last sibling")
        try:
            op = TemporalOperator(op)
        except ValueError as exc:
            raise ParseError(f"{path}.operator-to-next: {exc}") from exc
    children_docs = doc.get("children", [])
    children = tuple(
        _ctt_from_dict(c, f"{path}.children[{i}]", i == len(children_docs) - 1)
        for i, c in enumerate(children_docs)
    )
    needs_doc = doc.get("modality-needs", [])
    if needs_doc and children:
        raise ParseError(f"{path}: only leaves may declare modality-needs")
    try:
        needs = frozenset(Modality(m) for m in needs_doc)
    except ValueError as exc:
        raise ParseError(f"{path}.modality-needs: {exc}") from exc
    return CttNode(
        name=name, category=category, operator_to_next=op, children=children, modality_needs=needs
    )


def task_tree_from_dict(doc: dict, path: str = "tree") -> CttNode:
    return _ctt_from_dict(doc, path, is_last_sibling=True)


def task_tree_to_dict(node: CttNode) -> dict:
    out: dict = {"name": node.name, "category": node.category.value}
    if node.operator_to_next is not None:
        out["operator-to-next"] = node.operator_to_next.value
    if node.children:
        out["children"] = [task_tree_to_dict(c) for c in node.children]
    if node.modality_needs:
        out["modality-needs"] = sorted(m.value for m in node.modality_needs)
    return out


def load_task_tree(path: Path | str) -> CttNode:
    return task_tree_from_dict(_load_json(path), path=str(path))


def irvo_from_dict(doc: dict, path: str = "model") -> IrvoModel:
    entities = []
    for i, e in enumerate(_need_field(doc, "entities", path)):
        epath = f"{path}.entities[{i}]"
        try:
            kind = EntityKind(_need_field(e, "kind", epath))
        except ValueError as exc:
            raise ParseError(f"{epath}.kind: {exc}") from exc
        entities.append(Entity(_need_field(e, "id", epath), kind, e.get("label", "")))
    arrows = []
    for i, a in enumerate(doc.get("arrows", [])):
        apath = f"{path}.arrows[{i}]"
        try:
            channel = Channel(_need_field(a, "channel", apath))
        except ValueError as exc:
            raise ParseError(f"{apath}.channel: {exc}") from exc
        arrows.append(Arrow(_need_field(a, "from", apath), _need_field(a, "to", apath), channel))
    frames = []
    for i, f in enumerate(doc.get("fusion-frames", [])):
        if not isinstance(f, list) or not all(isinstance(m, str) for m in f):
            raise ParseError(f"{path}.fusion-frames[{i}]: expected a list of entity ids")
        frames.append(frozenset(f))
    return IrvoModel(tuple(entities), tuple(arrows), tuple(frames))


def irvo_to_dict(model: IrvoModel) -> dict:
    return {
        "entities": [
            {"id": e.entity_id, "kind": e.kind.value, "label": e.label} for e in model.entities
        ],
        "arrows": [
            {"from": a.from_id, "to": a.to_id, "channel": a.channel.value} for a in model.arrows
        ],
        "fusion-frames": [sorted(f) for f in model.fusion_frames],
    }


def load_irvo(path: Path | str) -> IrvoModel:
    return irvo_from_dict(_load_json(path), path=str(path))


def devices_from_dict(doc: dict, path: str = "referential") -> list[DeviceDescriptor]:
    devices = []
    for i, d in enumerate(_need_field(doc, "devices", path)):
        dpath = f"{path}.devices[{i}]"
        try:
            provides = frozenset(Modality(m) for m in _need_field(d, "provides", dpath))
        except ValueError as exc:
            raise ParseError(f"{dpath}.provides: {exc}") from exc
        try:
            devices.append(
                DeviceDescriptor(
                    device_id=_need_field(d, "device-id", dpath),
                    provides=provides,
                    exclusive_with=frozenset(d.get("exclusive-with", [])),
                )
            )
        except ValueError as exc:
            raise ParseError(f"{dpath}: {exc}") from exc
    return devices


def load_devices(path: Path | str) -> list[DeviceDescriptor]:
    return devices_from_dict(_load_json(path), path=str(path))


def _load_json(path: Path | str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise ParseError(f"{path}: empty document")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    return doc
