"""Scripted scenario runs: an ordered action list executed against an AppState.

Scripts are JSON documents with an ``actions`` array. Session and assistance
handles are script-local aliases ("s1", "c1") bound by the action that
creates them. A run produces a transcript: one entry per action plus a final
block with the ledger digest, so two runs under the same fixed clock are
byte-identical and a committed transcript can serve as a golden file.

A rejected scan is a normal outcome; any engine error is a scenario
deviation and aborts the run, naming the script line.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import context as contextmod
from .errors import HmtdError, ParseError
from .service import AppState


class ScenarioDeviation(HmtdError):
    """An action failed in a way the script did not anticipate."""

    code = "ScenarioDeviation"

    def __init__(self, line: int, action: dict, cause: HmtdError):
        super().__init__(f"action {line}: {cause.code}: {cause.message}")
        self.line = line
        self.action = action
        self.cause = cause


def load_script(path: Path | str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("actions", []), list):
        raise ParseError(f"{path}: script must be an object with an actions array")
    return doc


def _require(action: dict, key: str, line: int):
    if key not in action:
        raise ParseError(f"action {line}: missing field {key!r}")
    return action[key]


def run_scenario(script: dict, app: AppState) -> dict:
    """Execute every action in order; returns the transcript document."""
    sessions: dict[str, int] = {}
    collabs: dict[str, int] = {}
    entries = []

    def session_id(action: dict, line: int) -> int:
        alias = _require(action, "session", line)
        if alias not in sessions:
            raise ParseError(f"action {line}: unknown session alias {alias!r}")
        return sessions[alias]

    def collab_id(action: dict, line: int) -> int:
        alias = _require(action, "collab", line)
        if alias not in collabs:
            raise ParseError(f"action {line}: unknown collab alias {alias!r}")
        return collabs[alias]

    for line, action in enumerate(script.get("actions", []), start=1):
        kind = _require(action, "action", line)
        try:
            if kind == "authenticate":
                session = app.create_session(
                    _require(action, "badge-id", line), _require(action, "workflow-id", line)
                )
                sessions[_require(action, "session", line)] = session.session_id
                outcome = {"session-id": session.session_id, "phase": session.phase.value}
            elif kind == "bind-machine":
                result = app.bind(session_id(action, line), action.get("machine-id"))
                ctx = result["context"]
                outcome = {
                    "phase": result["session"]["phase"],
                    "start-time": result["session"]["start-time"],
                    "context": {
                        "provenance": ctx["provenance"],
                        "history-length": len(ctx["environment"]["history"]),
                        "last-operators": ctx["environment"]["last-operators"],
                    },
                }
            elif kind == "scan":
                result = app.scan(
                    session_id(action, line),
                    _require(action, "kind", line),
                    _require(action, "tag-id", line),
                )
                outcome = result["outcome"]
            elif kind == "report-defect":
                result = app.report_defect(
                    session_id(action, line),
                    _require(action, "part-id", line),
                    _require(action, "replacement-id", line),
                )
                outcome = {
                    "defect-count": result["session"]["defect-count"],
                    "replaced-parts": result["session"]["replaced-parts"],
                }
            elif kind == "request-assistance":
                collab = app.open_assistance(
                    session_id(action, line), _require(action, "expert-id", line)
                )
                collabs[_require(action, "collab", line)] = collab.collab_id
                outcome = {
                    "collab-id": collab.collab_id,
                    "snapshot-cursor": collab.snapshot.step_cursor,
                }
            elif kind == "send-indication":
                seq = app.send_indication(
                    collab_id(action, line),
                    _require(action, "kind", line),
                    action.get("payload") or {},
                )
                outcome = {"seq": seq}
            elif kind == "complete":
                result = app.complete(session_id(action, line))
                outcome = {"phase": result["session"]["phase"], "record": result["record"]}
            elif kind == "abort":
                result = app.abort(session_id(action, line))
                outcome = {"phase": result["session"]["phase"], "record": result["record"]}
            elif kind == "set-connectivity":
                mode = app.set_connectivity(_require(action, "mode", line))
                outcome = {"mode": mode.value}
            else:
                raise ParseError(f"action {line}: unknown action {kind!r}")
        except ParseError:
            raise
        except HmtdError as exc:
            raise ScenarioDeviation(line, action, exc) from exc
        entries.append({"line": line, "action": action, "outcome": outcome})

    final_sessions = {
        alias: {
            "session-id": sid,
            "phase": app.session(sid).phase.value,
            "step-cursor": app.session(sid).step_cursor,
            "defect-count": app.session(sid).defect_count,
        }
        for alias, sid in sorted(sessions.items())
    }
    return {
        "name": script.get("name", ""),
        "entries": entries,
        "final": {
            "event-count": len(app.ledger),
            "ledger-digest": app.ledger.digest(),
            "sessions": final_sessions,
            "connectivity": app.connectivity.value,
        },
    }


def transcript_bytes(transcript: dict) -> bytes:
    return (json.dumps(transcript, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode(
        "utf-8"
    )


def run_file(
    script_path: Path | str,
    data_dir: Path | str,
    clock,
    platform_id: str = "config-1",
    connectivity: contextmod.Connectivity = contextmod.Connectivity.ONLINE,
) -> dict:
    script = load_script(script_path)
    app = AppState(data_dir, clock=clock, platform_id=platform_id, connectivity=connectivity)
    try:
        return run_scenario(script, app)
    finally:
        app.close()
