"""The intervention state machine.

An intervention walks a prescribed workflow: the operator authenticates with
a badge, binds the target machine by scanning its tag, then validates each
step by scanning the required tool and then the required part, in order. Any
other scan is rejected without changing the session. Completion writes a
history record onto the machine tag.

Every state change emits exactly one trace event, so a session can be rebuilt
from the ledger alone (see ``events.fold_session``).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    IncompleteWorkflow,
    MachineMismatch,
    ParseError,
    UnknownBadge,
    UnknownPart,
    Unqualified,
    WrongKind,
    WrongPhase,
)
from .events import EventKind, Phase, ScanSubstate, SessionSummary, TraceEvent
from .tags import HistoryRecord, Outcome, TagIdentity, TagKind, TagMemory


class StepPhase(str, enum.Enum):
    DISASSEMBLY = "Disassembly"
    REASSEMBLY = "Reassembly"


class Media(str, enum.Enum):
    TEXT = "Text"
    IMAGE = "Image"
    VIDEO = "Video"
    SOUND = "Sound"


@dataclass(frozen=True)
class DocAsset:
    media: Media
    uri: str
    title: str


@dataclass(frozen=True)
class StepDefinition:
    index: int
    phase: StepPhase
    required_tool_id: int
    required_part_id: int
    doc_assets: tuple[DocAsset, ...] = ()

    def __post_init__(self):
        if self.required_tool_id <= 0 or self.required_part_id <= 0:
            raise ValueError("tool and part ids must be positive")


@dataclass(frozen=True)
class WorkflowDefinition:
    workflow_id: int
    target_machine_id: int
    required_qualification: str
    steps: tuple[StepDefinition, ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a workflow needs at least one step")
        if self.target_machine_id <= 0:
            raise ValueError("target machine id must be positive")
        if [s.index for s in self.steps] != list(range(len(self.steps))):
            raise ValueError("step indices must be contiguous from 0")
        seen_reassembly = False
        for step in self.steps:
            if step.phase is StepPhase.REASSEMBLY:
                seen_reassembly = True
            elif seen_reassembly:
                raise ValueError("disassembly steps must precede reassembly steps")


def mirrored_reassembly(disassembly: list[StepDefinition]) -> tuple[StepDefinition, ...]:
    """Author helper: reassembly steps as the mirror image of disassembly."""
    steps = list(disassembly)
    for src in reversed(disassembly):
        steps.append(
            StepDefinition(
                index=len(steps),
                phase=StepPhase.REASSEMBLY,
                required_tool_id=src.required_tool_id,
                required_part_id=src.required_part_id,
                doc_assets=src.doc_assets,
            )
        )
    return tuple(steps)


@dataclass(frozen=True)
class Operator:
    badge_id: int
    name: str
    qualifications: frozenset[str]

    def __post_init__(self):
        if self.badge_id <= 0:
            raise ValueError("badge id must be positive")


class OperatorRegistry:
    """Badge-id lookup over the known operators."""

    def __init__(self, operators: list[Operator] | None = None):
        self._by_badge = {op.badge_id: op for op in operators or []}

    def add(self, operator: Operator) -> None:
        self._by_badge[operator.badge_id] = operator

    def lookup(self, badge_id: int) -> Operator:
        op = self._by_badge.get(badge_id)
        if op is None:
            raise UnknownBadge(f"badge {badge_id} is not registered")
        return op

    def __iter__(self):
        return iter(self._by_badge.values())


class ScanResult(str, enum.Enum):
    TOOL_ACCEPTED = "ToolAccepted"
    PART_ACCEPTED_STEP_COMPLETE = "PartAccepted-StepComplete"
    REJECTED = "Rejected"


class RejectReason(str, enum.Enum):
    WRONG_TOOL = "WrongTool"
    WRONG_PART = "WrongPart"
    OUT_OF_ORDER = "OutOfOrder"
    WRONG_PHASE = "WrongPhase"
    DEFECTIVE_PART_PENDING = "DefectivePartPending"


@dataclass(frozen=True)
class ScanOutcome:
    result: ScanResult
    reason: RejectReason | None
    next_expected: str

    def __post_init__(self):
        if (self.result is ScanResult.REJECTED) != (self.reason is not None):
            raise ValueError("reason must be present exactly when rejected")


@dataclass
class InterventionSession:
    session_id: int  # doubles as the intervention id stored on the tag
    operator: Operator
    workflow: WorkflowDefinition
    phase: Phase = Phase.AWAITING_MACHINE
    step_cursor: int = 0
    scan_substate: ScanSubstate = ScanSubstate.EXPECT_TOOL
    start_time: int | None = None
    end_time: int | None = None
    defect_count: int = 0
    replaced_parts: dict[int, int] = field(default_factory=dict)

    def current_step(self) -> StepDefinition | None:
        if self.step_cursor >= len(self.workflow.steps):
            return None
        return self.workflow.steps[self.step_cursor]

    def effective_part_id(self, declared: int) -> int:
        """Follow the replacement chain from a step's declared part id."""
        seen = set()
        while declared in self.replaced_parts and declared not in seen:
            seen.add(declared)
            declared = self.replaced_parts[declared]
        return declared

    def expected_description(self) -> str:
        if self.phase is Phase.AWAITING_MACHINE:
            return f"Machine {self.workflow.target_machine_id}"
        step = self.current_step()
        if step is None or self.phase in (Phase.COMPLETED, Phase.ABORTED):
            return "none"
        if self.scan_substate is ScanSubstate.EXPECT_TOOL:
            return f"Tool {step.required_tool_id}"
        return f"Part {self.effective_part_id(step.required_part_id)}"

    def expected_identity(self) -> TagIdentity | None:
        """The tag the session will accept next, None once all steps are done."""
        if self.phase is not Phase.IN_PROGRESS:
            return None
        step = self.current_step()
        if step is None:
            return None
        if self.scan_substate is ScanSubstate.EXPECT_TOOL:
            return TagIdentity(TagKind.TOOL, step.required_tool_id)
        return TagIdentity(TagKind.PART, self.effective_part_id(step.required_part_id))

    def summary(self) -> SessionSummary:
        return SessionSummary(
            session_id=self.session_id,
            operator_badge_id=self.operator.badge_id,
            workflow_id=self.workflow.workflow_id,
            machine_id=self.workflow.target_machine_id,
            phase=self.phase,
            step_cursor=self.step_cursor,
            scan_substate=self.scan_substate,
            defect_count=self.defect_count,
            replaced_parts=dict(self.replaced_parts),
            start_time=self.start_time,
            end_time=self.end_time,
        )


# ---------------------------------------------------------------------------
# Operations. Each takes `ledger` (anything with append(TraceEvent) -> int)
# and `now` in epoch minutes; they mutate the session in place.
# ---------------------------------------------------------------------------


def authenticate(
    badge_id: int,
    registry: OperatorRegistry,
    workflow: WorkflowDefinition,
    ledger,
    now: int,
    session_id: int,
) -> InterventionSession:
    """Open a session for a badge holder qualified for the workflow."""
    operator = registry.lookup(badge_id)
    if workflow.required_qualification not in operator.qualifications:
        raise Unqualified(
            f"operator {operator.badge_id} lacks qualification "
            f"{workflow.required_qualification!r}"
        )
    session = InterventionSession(session_id=session_id, operator=operator, workflow=workflow)
    ledger.append(
        TraceEvent(
            seq=0,
            timestamp=now,
            session_id=session_id,
            kind=EventKind.OPERATOR_AUTHENTICATED,
            operator_badge_id=operator.badge_id,
            machine_id=workflow.target_machine_id,
            detail=f"workflow={workflow.workflow_id}",
        )
    )
    return session


def _require_phase(session: InterventionSession, *phases: Phase) -> None:
    if session.phase not in phases:
        raise WrongPhase(
            f"session {session.session_id} is {session.phase.value}, "
            f"expected {' or '.join(p.value for p in phases)}"
        )


def bind_machine(
    session: InterventionSession, machine_tag: TagMemory, ledger, now: int
) -> None:
    """Match the scanned machine tag against the workflow target and start."""
    _require_phase(session, Phase.AWAITING_MACHINE)
    ident = machine_tag.read_identity()
    if ident.kind is not TagKind.MACHINE:
        raise WrongKind(f"expected a machine tag, got {ident.kind.name.lower()}")
    if ident.entity_id != session.workflow.target_machine_id:
        raise MachineMismatch(
            f"tag is machine {ident.entity_id}, workflow targets "
            f"{session.workflow.target_machine_id}"
        )
    session.phase = Phase.IN_PROGRESS
    session.start_time = now
    ledger.append(
        TraceEvent(
            seq=0,
            timestamp=now,
            session_id=session.session_id,
            kind=EventKind.INTERVENTION_STARTED,
            operator_badge_id=session.operator.badge_id,
            machine_id=ident.entity_id,
        )
    )


def _reject(
    session: InterventionSession,
    tag: TagIdentity,
    reason: RejectReason,
    ledger,
    now: int,
) -> ScanOutcome:
    ledger.append(
        TraceEvent(
            seq=0,
            timestamp=now,
            session_id=session.session_id,
            kind=EventKind.SCAN_REJECTED,
            operator_badge_id=session.operator.badge_id,
            machine_id=session.workflow.target_machine_id,
            tool_id=tag.entity_id if tag.kind is TagKind.TOOL else None,
            part_id=tag.entity_id if tag.kind is TagKind.PART else None,
            detail=f"reason={reason.value};scanned={tag.kind.name.title()}:{tag.entity_id}",
        )
    )
    return ScanOutcome(ScanResult.REJECTED, reason, session.expected_description())


def scan(
    session: InterventionSession, tag: TagIdentity, ledger, now: int
) -> ScanOutcome:
    """Validate one tool or part scan against the prescription.

    Rejection is an outcome, not a fault: the session is left untouched and a
    ScanRejected event is traced.
    """
    _require_phase(session, Phase.IN_PROGRESS)
    step = session.current_step()
    if step is None:
        # All steps validated; only complete() remains.
        return _reject(session, tag, RejectReason.OUT_OF_ORDER, ledger, now)

    if session.scan_substate is ScanSubstate.EXPECT_TOOL:
        if tag.kind is not TagKind.TOOL:
            return _reject(session, tag, RejectReason.OUT_OF_ORDER, ledger, now)
        if tag.entity_id != step.required_tool_id:
            return _reject(session, tag, RejectReason.WRONG_TOOL, ledger, now)
        session.scan_substate = ScanSubstate.EXPECT_PART
        ledger.append(
            TraceEvent(
                seq=0,
                timestamp=now,
                session_id=session.session_id,
                kind=EventKind.TOOL_VALIDATED,
                operator_badge_id=session.operator.badge_id,
                machine_id=session.workflow.target_machine_id,
                tool_id=tag.entity_id,
                detail=f"step={step.index}",
            )
        )
        return ScanOutcome(ScanResult.TOOL_ACCEPTED, None, session.expected_description())

    # ExpectPart
    if tag.kind is not TagKind.PART:
        return _reject(session, tag, RejectReason.OUT_OF_ORDER, ledger, now)
    required = session.effective_part_id(step.required_part_id)
    if tag.entity_id != required:
        if tag.entity_id in session.replaced_parts:
            # The old part of a pending replacement was scanned again.
            return _reject(session, tag, RejectReason.DEFECTIVE_PART_PENDING, ledger, now)
        return _reject(session, tag, RejectReason.WRONG_PART, ledger, now)
    session.step_cursor += 1
    session.scan_substate = ScanSubstate.EXPECT_TOOL
    ledger.append(
        TraceEvent(
            seq=0,
            timestamp=now,
            session_id=session.session_id,
            kind=EventKind.STEP_COMPLETED,
            operator_badge_id=session.operator.badge_id,
            machine_id=session.workflow.target_machine_id,
            tool_id=step.required_tool_id,
            part_id=tag.entity_id,
            detail=f"step={step.index};phase={step.phase.value}",
        )
    )
    return ScanOutcome(
        ScanResult.PART_ACCEPTED_STEP_COMPLETE, None, session.expected_description()
    )


def report_defective(
    session: InterventionSession,
    part_tag: TagMemory,
    replacement_part_id: int,
    ledger,
    now: int,
) -> TagMemory:
    """Flag a defective part and substitute its replacement in remaining steps.

    Returns the part tag with its defect flag set; callers persist it.
    """
    _require_phase(session, Phase.IN_PROGRESS)
    ident = part_tag.read_identity()
    if ident.kind is not TagKind.PART:
        raise WrongKind(f"expected a part tag, got {ident.kind.name.lower()}")
    if replacement_part_id <= 0:
        raise ValueError("replacement part id must be positive")
    old_id = ident.entity_id
    remaining = session.workflow.steps[session.step_cursor :]
    if not any(session.effective_part_id(s.required_part_id) == old_id for s in remaining):
        raise UnknownPart(
            f"part {old_id} is not required by any remaining step of "
            f"workflow {session.workflow.workflow_id}"
        )
    flagged = part_tag.set_defect_flag(True)
    session.replaced_parts[old_id] = replacement_part_id
    session.defect_count += 1
    ledger.append(
        TraceEvent(
            seq=0,
            timestamp=now,
            session_id=session.session_id,
            kind=EventKind.PART_REPLACED,
            operator_badge_id=session.operator.badge_id,
            machine_id=session.workflow.target_machine_id,
            part_id=old_id,
            detail=f"{old_id}->{replacement_part_id}",
        )
    )
    return flagged


def _close_record(session: InterventionSession, now: int, outcome: Outcome) -> HistoryRecord:
    return HistoryRecord(
        intervention_id=session.session_id,
        operator_badge_id=session.operator.badge_id,
        workflow_id=session.workflow.workflow_id,
        start_time=session.start_time if session.start_time is not None else now,
        end_time=now,
        outcome=outcome,
        defect_count=min(session.defect_count, 0xFF),
        step_count=session.step_cursor,
    )


def _check_machine_tag(session: InterventionSession, machine_tag: TagMemory) -> None:
    ident = machine_tag.read_identity()
    if ident.kind is not TagKind.MACHINE:
        raise WrongKind(f"expected a machine tag, got {ident.kind.name.lower()}")
    if ident.entity_id != session.workflow.target_machine_id:
        raise MachineMismatch(
            f"tag is machine {ident.entity_id}, session works on "
            f"{session.workflow.target_machine_id}"
        )


def complete(
    session: InterventionSession, machine_tag: TagMemory, ledger, now: int
) -> TagMemory:
    """Finish a fully validated intervention and write its history record."""
    _require_phase(session, Phase.IN_PROGRESS)
    if session.step_cursor < len(session.workflow.steps):
        raise IncompleteWorkflow(
            f"{session.step_cursor} of {len(session.workflow.steps)} steps validated"
        )
    _check_machine_tag(session, machine_tag)
    outcome = (
        Outcome.COMPLETED_WITH_REPLACEMENT if session.defect_count > 0 else Outcome.COMPLETED
    )
    session.phase = Phase.COMPLETED
    session.end_time = now
    session.scan_substate = ScanSubstate.EXPECT_TOOL
    updated = machine_tag.append_history(_close_record(session, now, outcome))
    ledger.append(
        TraceEvent(
            seq=0,
            timestamp=now,
            session_id=session.session_id,
            kind=EventKind.INTERVENTION_COMPLETED,
            operator_badge_id=session.operator.badge_id,
            machine_id=session.workflow.target_machine_id,
            detail=f"outcome={outcome.name};steps={session.step_cursor}",
        )
    )
    return updated


def abort(
    session: InterventionSession, machine_tag: TagMemory, ledger, now: int
) -> TagMemory:
    """Abandon an intervention, recording how far it got."""
    _require_phase(session, Phase.IN_PROGRESS, Phase.AWAITING_REPLACEMENT_PART)
    _check_machine_tag(session, machine_tag)
    session.phase = Phase.ABORTED
    session.end_time = now
    updated = machine_tag.append_history(_close_record(session, now, Outcome.ABORTED))
    ledger.append(
        TraceEvent(
            seq=0,
            timestamp=now,
            session_id=session.session_id,
            kind=EventKind.INTERVENTION_ABORTED,
            operator_badge_id=session.operator.badge_id,
            machine_id=session.workflow.target_machine_id,
            detail=f"steps={session.step_cursor}",
        )
    )
    return updated


# ---------------------------------------------------------------------------
# Workflow documents (UTF-8 JSON)
# ---------------------------------------------------------------------------


def _field(doc: dict, key: str, path: str):
    if key not in doc:
        raise ParseError(f"{path}: missing field {key!r}")
    return doc[key]


def workflow_from_dict(doc: dict, path: str = "workflow") -> WorkflowDefinition:
    try:
        steps = []
        for i, step_doc in enumerate(_field(doc, "steps", path)):
            spath = f"{path}.steps[{i}]"
            docs = tuple(
                DocAsset(
                    media=Media(_field(d, "media", f"{spath}.doc-assets[{j}]")),
                    uri=_field(d, "uri", f"{spath}.doc-assets[{j}]"),
                    title=_field(d, "title", f"{spath}.doc-assets[{j}]"),
                )
                for j, d in enumerate(step_doc.get("doc-assets", []))
            )
            steps.append(
                StepDefinition(
                    index=_field(step_doc, "index", spath),
                    phase=StepPhase(_field(step_doc, "phase", spath)),
                    required_tool_id=_field(step_doc, "required-tool-id", spath),
                    required_part_id=_field(step_doc, "required-part-id", spath),
                    doc_assets=docs,
                )
            )
        return WorkflowDefinition(
            workflow_id=_field(doc, "workflow-id", path),
            target_machine_id=_field(doc, "target-machine-id", path),
            required_qualification=_field(doc, "required-qualification", path),
            steps=tuple(steps),
        )
    except ParseError:
        raise
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def workflow_to_dict(wf: WorkflowDefinition) -> dict:
    return {
        "workflow-id": wf.workflow_id,
        "target-machine-id": wf.target_machine_id,
        "required-qualification": wf.required_qualification,
        "steps": [
            {
                "index": s.index,
                "phase": s.phase.value,
                "required-tool-id": s.required_tool_id,
                "required-part-id": s.required_part_id,
                "doc-assets": [
                    {"media": d.media.value, "uri": d.uri, "title": d.title}
                    for d in s.doc_assets
                ],
            }
            for s in wf.steps
        ],
    }


def load_workflow(path: Path | str) -> WorkflowDefinition:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    return workflow_from_dict(doc, path=str(path))
