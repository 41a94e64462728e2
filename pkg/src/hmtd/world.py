"""Data-directory layout and world loading.

A data directory holds everything one deployment needs:

    data/
      operators.json      badge directory (qualifications, media preferences)
      experts.json        remote experts reachable for assistance
      workflows/*.json    workflow definitions
      sgdt/*.json         server-side machine records
      tags/*.tag          256-octet tag snapshots, one per entity
      trace.log           the append-only event log

``ensure_tags`` materializes missing tag files for every entity the world
mentions so scans and completions always have a tag to write to.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .context import SgdtStore
from .errors import ConfigError, ParseError
from .prescription import (
    Media,
    Operator,
    OperatorRegistry,
    WorkflowDefinition,
    load_workflow,
)
from .tags import TagIdentity, TagKind, TagMemory, init_tag, load_tag, tag_path


@dataclass
class World:
    data_dir: Path
    registry: OperatorRegistry
    preferences: dict[int, tuple[Media, ...]]
    experts: dict[str, str]  # expert-id -> display name
    workflows: dict[int, WorkflowDefinition]
    sgdt: SgdtStore
    operator_names: dict[int, str] = field(default_factory=dict)

    @property
    def tags_dir(self) -> Path:
        return self.data_dir / "tags"

    @property
    def trace_path(self) -> Path:
        return self.data_dir / "trace.log"

    def load_tag(self, kind: TagKind, entity_id: int) -> TagMemory:
        path = tag_path(self.tags_dir, kind, entity_id)
        if not path.exists():
            raise ConfigError(f"no tag snapshot {path.name} in {self.tags_dir}")
        return load_tag(path)

    def save_tag(self, tag: TagMemory) -> Path:
        return tag.save(self.tags_dir)

    def tag_identities(self) -> list[TagIdentity]:
        out = []
        for path in sorted(self.tags_dir.glob("*.tag")):
            try:
                out.append(load_tag(path).read_identity())
            except Exception:
                continue
        return out


def _load_json_doc(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"missing world file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc


def load_world(data_dir: Path | str) -> World:
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise ConfigError(f"data directory does not exist: {data_dir}")

    registry = OperatorRegistry()
    preferences: dict[int, tuple[Media, ...]] = {}
    names: dict[int, str] = {}
    for doc in _load_json_doc(data_dir / "operators.json").get("operators", []):
        op = Operator(
            badge_id=doc["badge-id"],
            name=doc.get("name", ""),
            qualifications=frozenset(doc.get("qualifications", [])),
        )
        registry.add(op)
        names[op.badge_id] = op.name
        preferences[op.badge_id] = tuple(Media(m) for m in doc.get("preferred-media", []))

    experts = {
        doc["expert-id"]: doc.get("name", "")
        for doc in _load_json_doc(data_dir / "experts.json").get("experts", [])
    }

    workflows: dict[int, WorkflowDefinition] = {}
    wf_dir = data_dir / "workflows"
    if not wf_dir.is_dir():
        raise ConfigError(f"missing workflows directory: {wf_dir}")
    for path in sorted(wf_dir.glob("*.json")):
        wf = load_workflow(path)
        workflows[wf.workflow_id] = wf

    (data_dir / "tags").mkdir(exist_ok=True)
    return World(
        data_dir=data_dir,
        registry=registry,
        preferences=preferences,
        experts=experts,
        workflows=workflows,
        sgdt=SgdtStore(data_dir / "sgdt"),
        operator_names=names,
    )


def ensure_tags(world: World) -> list[Path]:
    """Create identity-only tag files for every entity the world names."""
    wanted: set[TagIdentity] = set()
    for machine_id in world.sgdt.machine_ids():
        wanted.add(TagIdentity(TagKind.MACHINE, machine_id))
    for wf in world.workflows.values():
        wanted.add(TagIdentity(TagKind.MACHINE, wf.target_machine_id))
        for step in wf.steps:
            wanted.add(TagIdentity(TagKind.TOOL, step.required_tool_id))
            wanted.add(TagIdentity(TagKind.PART, step.required_part_id))
    for op in world.registry:
        wanted.add(TagIdentity(TagKind.BADGE, op.badge_id))

    created = []
    for ident in sorted(wanted, key=lambda i: (i.kind, i.entity_id)):
        path = tag_path(world.tags_dir, ident.kind, ident.entity_id)
        if not path.exists():
            init_tag(ident).save(world.tags_dir)
            created.append(path)
    return created


def seed_data_dir(data_dir: Path | str, fixtures_dir: Path | str) -> None:
    """Copy a fixture world (operators, experts, workflows, sgdt) into a fresh data dir."""
    import shutil

    data_dir, fixtures_dir = Path(data_dir), Path(fixtures_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    for name in ("operators.json", "experts.json"):
        shutil.copy(fixtures_dir / name, data_dir / name)
    for sub in ("workflows", "sgdt"):
        (data_dir / sub).mkdir(exist_ok=True)
        for path in (fixtures_dir / sub).glob("*.json"):
            shutil.copy(path, data_dir / sub / path.name)
