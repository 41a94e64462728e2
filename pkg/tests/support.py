"""Shared test helpers."""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from hmtd.prescription import StepDefinition, StepPhase, WorkflowDefinition

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


class MemoryLedger:
    """In-memory stand-in for TraceLedger: validates, assigns seqs, keeps events."""

    def __init__(self):
        self.events = []

    def append(self, event):
        event.validate()
        seq = len(self.events) + 1
        self.events.append(replace(event, seq=seq))
        return seq

    def session_events(self, session_id):
        return [e for e in self.events if e.session_id == session_id]


def make_workflow(pairs, *, workflow_id=7, machine_id=42, qualification="MECA-2", phases=None):
    """Build a workflow from (tool_id, part_id) pairs.

    ``phases`` defaults to disassembly for the first half and reassembly for
    the rest (a single step counts as disassembly).
    """
    n = len(pairs)
    if phases is None:
        split = (n + 1) // 2
        phases = [StepPhase.DISASSEMBLY] * split + [StepPhase.REASSEMBLY] * (n - split)
    steps = tuple(
        StepDefinition(index=i, phase=phases[i], required_tool_id=t, required_part_id=p)
        for i, (t, p) in enumerate(pairs)
    )
    return WorkflowDefinition(
        workflow_id=workflow_id,
        target_machine_id=machine_id,
        required_qualification=qualification,
        steps=steps,
    )
