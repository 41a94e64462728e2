"""The deployable service: engine facade plus a small threaded HTTP server.

``AppState`` owns the world, the trace ledger and the live sessions, and is
the single entry point used by the HTTP handlers, the scenario runner and the
tests. Requests touching one session are serialized behind a per-session
lock; the ledger provides its own linearizable append.

On startup the ledger is replayed so interventions that were in flight when
the previous process died resume from their last durable state.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import collab as collabmod
from . import context as contextmod
from . import prescription as engine
from .clock import WallClock, iso, parse_clock_spec
from .errors import (
    BindFailure,
    ConfigError,
    CorruptTag,
    DataDirUnwritable,
    ExpertUnavailable,
    HmtdError,
    IncompleteWorkflow,
    InvalidEvent,
    MachineMismatch,
    MalformedIndication,
    ParseError,
    SessionClosed,
    StorageFailure,
    UnknownBadge,
    UnknownMachine,
    UnknownPart,
    UnknownSession,
    Unqualified,
    WrongKind,
    WrongPhase,
)
from .events import Phase
from .ledger import TraceLedger
from .tags import TagKind, load_tag
from .world import World, ensure_tags, load_world

LONG_POLL_CAP_SECONDS = 25.0

_STATUS_BY_CODE = {
    UnknownBadge.code: 404,
    UnknownSession.code: 404,
    UnknownMachine.code: 404,
    UnknownPart.code: 404,
    ExpertUnavailable.code: 404,
    Unqualified.code: 403,
    MachineMismatch.code: 409,
    WrongPhase.code: 409,
    IncompleteWorkflow.code: 409,
    SessionClosed.code: 409,
    WrongKind.code: 400,
    MalformedIndication.code: 400,
    InvalidEvent.code: 400,
    ParseError.code: 400,
    ConfigError.code: 400,
    CorruptTag.code: 422,
    StorageFailure.code: 500,
}


@dataclass
class ServiceConfig:
    data_dir: Path
    port: int = 8471
    clock_spec: str = "wall"
    platform_id: str = "config-1"
    ui_dir: Path | None = None


class AppState:
    """Everything the endpoints operate on."""

    def __init__(
        self,
        data_dir: Path | str,
        clock=None,
        platform_id: str = "config-1",
        connectivity: contextmod.Connectivity = contextmod.Connectivity.ONLINE,
    ):
        self.world: World = load_world(data_dir)
        ensure_tags(self.world)
        try:
            self.ledger = TraceLedger(self.world.trace_path)
        except OSError as exc:
            raise DataDirUnwritable(f"cannot open trace log: {exc}") from exc
        self.clock = clock if clock is not None else WallClock()
        self.platform_id = platform_id
        self.connectivity = connectivity
        self.collabs = collabmod.CollabManager(set(self.world.experts))
        self.sessions: dict[int, engine.InterventionSession] = {}
        self._session_locks: dict[int, threading.Lock] = {}
        self._state_lock = threading.Lock()
        self._next_session_id = max(self.ledger.session_ids(), default=0) + 1
        self._restore_sessions()

    # -- lifecycle -----------------------------------------------------------

    def close(self) -> None:
        self.ledger.close()

    def _restore_sessions(self) -> None:
        for sid in self.ledger.session_ids():
            summary = self.ledger.replay(sid)
            if summary.phase in (Phase.COMPLETED, Phase.ABORTED):
                continue
            workflow = self.world.workflows.get(summary.workflow_id)
            if workflow is None:
                continue
            try:
                operator = self.world.registry.lookup(summary.operator_badge_id)
            except UnknownBadge:
                continue
            session = engine.InterventionSession(
                session_id=sid,
                operator=operator,
                workflow=workflow,
                phase=summary.phase,
                step_cursor=summary.step_cursor,
                scan_substate=summary.scan_substate,
                start_time=summary.start_time,
                end_time=summary.end_time,
                defect_count=summary.defect_count,
                replaced_parts=dict(summary.replaced_parts),
            )
            self.sessions[sid] = session

    # -- helpers ------------------------------------------------------------

    def _lock_for(self, session_id: int) -> threading.Lock:
        with self._state_lock:
            return self._session_locks.setdefault(session_id, threading.Lock())

    def session(self, session_id: int) -> engine.InterventionSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id}")
        return session

    def _machine_tag(self, machine_id: int):
        try:
            return self.world.load_tag(TagKind.MACHINE, machine_id)
        except ConfigError:
            raise UnknownMachine(f"no tag snapshot for machine {machine_id}") from None

    def session_json(self, session: engine.InterventionSession) -> dict:
        step = session.current_step()
        expected = session.expected_identity()
        return {
            "session-id": session.session_id,
            "phase": session.phase.value,
            "step-cursor": session.step_cursor,
            "step-count": len(session.workflow.steps),
            "scan-substate": session.scan_substate.value,
            "next-expected": session.expected_description(),
            "expected-tag": (
                {"kind": expected.kind.name.title(), "tag-id": expected.entity_id}
                if expected
                else None
            ),
            "defect-count": session.defect_count,
            "replaced-parts": {str(k): v for k, v in sorted(session.replaced_parts.items())},
            "workflow-id": session.workflow.workflow_id,
            "machine-id": session.workflow.target_machine_id,
            "operator": {
                "badge-id": session.operator.badge_id,
                "name": session.operator.name,
            },
            "start-time": session.start_time,
            "end-time": session.end_time,
            "current-step": (
                {
                    "index": step.index,
                    "phase": step.phase.value,
                    "required-tool-id": step.required_tool_id,
                    "required-part-id": session.effective_part_id(step.required_part_id),
                    "declared-part-id": step.required_part_id,
                    "doc-assets": [
                        {"media": d.media.value, "uri": d.uri, "title": d.title}
                        for d in step.doc_assets
                    ],
                }
                if step
                else None
            ),
        }

    def event_json(self, event) -> dict:
        doc = event.to_json_dict()
        doc["iso-time"] = iso(event.timestamp)
        return doc

    # -- operations (one lockable unit each) ------------------------------------

    def create_session(self, badge_id: int, workflow_id: int) -> engine.InterventionSession:
        workflow = self.world.workflows.get(workflow_id)
        if workflow is None:
            raise ConfigError(f"no workflow {workflow_id}")
        with self._state_lock:
            session_id = self._next_session_id
            session = engine.authenticate(
                badge_id, self.world.registry, workflow, self.ledger, self.clock.now(), session_id
            )
            # only a successful authentication consumes the id
            self._next_session_id += 1
            self.sessions[session_id] = session
        return session

    def bind(self, session_id: int, machine_id: int | None, tag_file: str | None = None) -> dict:
        session = self.session(session_id)
        with self._lock_for(session_id):
            if tag_file:
                tag = load_tag(self.world.data_dir / tag_file)
            else:
                tag = self._machine_tag(machine_id or session.workflow.target_machine_id)
            engine.bind_machine(session, tag, self.ledger, self.clock.now())
            bundle, provenance = self.resolve_context(
                tag.read_identity().entity_id, session.operator.badge_id
            )
        return {
            "session": self.session_json(session),
            "context": contextmod.bundle_to_dict(bundle, provenance),
        }

    def scan(self, session_id: int, kind: str, tag_id: int) -> dict:
        session = self.session(session_id)
        try:
            identity = engine.TagIdentity(TagKind[kind.upper()], tag_id)
        except KeyError:
            raise ParseError(f"unknown tag kind {kind!r}") from None
        with self._lock_for(session_id):
            try:
                outcome = engine.scan(session, identity, self.ledger, self.clock.now())
            except WrongPhase:
                outcome = engine.ScanOutcome(
                    engine.ScanResult.REJECTED,
                    engine.RejectReason.WRONG_PHASE,
                    session.expected_description(),
                )
        return {
            "outcome": {
                "result": outcome.result.value,
                "reason": outcome.reason.value if outcome.reason else None,
                "next-expected": outcome.next_expected,
            },
            "session": self.session_json(session),
        }

    def report_defect(self, session_id: int, part_id: int, replacement_id: int) -> dict:
        session = self.session(session_id)
        with self._lock_for(session_id):
            try:
                part_tag = self.world.load_tag(TagKind.PART, part_id)
            except ConfigError:
                raise UnknownPart(f"no tag snapshot for part {part_id}") from None
            flagged = engine.report_defective(
                session, part_tag, replacement_id, self.ledger, self.clock.now()
            )
            self.world.save_tag(flagged)
        return {"session": self.session_json(session)}

    def complete(self, session_id: int) -> dict:
        session = self.session(session_id)
        with self._lock_for(session_id):
            tag = self._machine_tag(session.workflow.target_machine_id)
            updated = engine.complete(session, tag, self.ledger, self.clock.now())
            self.world.save_tag(updated)
            if self.connectivity is contextmod.Connectivity.ONLINE:
                contextmod.sync_tag(updated, self.world.sgdt)
            record = updated.read_history()[-1]
        return {
            "record": contextmod.history_record_to_dict(record),
            "session": self.session_json(session),
        }

    def abort(self, session_id: int) -> dict:
        session = self.session(session_id)
        with self._lock_for(session_id):
            tag = self._machine_tag(session.workflow.target_machine_id)
            updated = engine.abort(session, tag, self.ledger, self.clock.now())
            self.world.save_tag(updated)
            if self.connectivity is contextmod.Connectivity.ONLINE:
                contextmod.sync_tag(updated, self.world.sgdt)
            record = updated.read_history()[-1]
        return {
            "record": contextmod.history_record_to_dict(record),
            "session": self.session_json(session),
        }

    def resolve_context(self, machine_id: int, badge_id: int, mode: str | None = None):
        connectivity = self.connectivity
        if mode:
            try:
                connectivity = contextmod.Connectivity(mode.title())
            except ValueError:
                raise ParseError(f"mode must be online or offline, got {mode!r}") from None
        tag = self._machine_tag(machine_id)
        return contextmod.resolve(
            tag,
            connectivity,
            self.world.sgdt,
            badge_id,
            platform_id=self.platform_id,
            preferences=self.world.preferences,
        )

    def open_assistance(self, session_id: int, expert_id: str) -> collabmod.CollabSession:
        session = self.session(session_id)
        with self._lock_for(session_id):
            bundle, provenance = self.resolve_context(
                session.workflow.target_machine_id, session.operator.badge_id
            )
            snapshot = collabmod.Snapshot(
                bundle=bundle,
                provenance=provenance,
                step_cursor=session.step_cursor,
                recent_events=self.ledger.session_events(session_id)[-10:],
            )
            return self.collabs.open_assistance(
                session, expert_id, snapshot, self.ledger, self.clock.now()
            )

    def send_indication(self, collab_id: int, kind: str, payload: dict) -> int:
        collab = self.collabs.get(collab_id)
        try:
            ikind = collabmod.IndicationKind(kind)
        except ValueError:
            raise MalformedIndication(f"unknown indication kind {kind!r}") from None
        session = self.session(collab.intervention_session_id)
        return self.collabs.send_indication(
            collab,
            collabmod.Indication(ikind, payload),
            session,
            self.ledger,
            self.clock.now(),
        )

    def collab_json(self, collab: collabmod.CollabSession, with_snapshot: bool = False) -> dict:
        doc = {
            "collab-id": collab.collab_id,
            "session-id": collab.intervention_session_id,
            "expert-id": collab.expert_id,
            "state": collab.state.value,
            "indication-count": len(collab.outbox),
        }
        if with_snapshot:
            doc["snapshot"] = {
                "context": contextmod.bundle_to_dict(
                    collab.snapshot.bundle, collab.snapshot.provenance
                ),
                "step-cursor": collab.snapshot.step_cursor,
                "recent-events": [self.event_json(e) for e in collab.snapshot.recent_events],
            }
        return doc

    def set_connectivity(self, mode: str) -> contextmod.Connectivity:
        try:
            self.connectivity = contextmod.Connectivity(mode.title())
        except ValueError:
            raise ParseError(f"mode must be Online or Offline, got {mode!r}") from None
        return self.connectivity


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

_ROUTES: list[tuple[str, re.Pattern, str]] = [
    ("GET", re.compile(r"^/health$"), "health"),
    ("POST", re.compile(r"^/sessions$"), "create_session"),
    ("GET", re.compile(r"^/sessions$"), "list_sessions"),
    ("GET", re.compile(r"^/sessions/(?P<sid>\d+)$"), "get_session"),
    ("POST", re.compile(r"^/sessions/(?P<sid>\d+)/bind$"), "bind"),
    ("POST", re.compile(r"^/sessions/(?P<sid>\d+)/scan$"), "scan"),
    ("POST", re.compile(r"^/sessions/(?P<sid>\d+)/defect$"), "defect"),
    ("POST", re.compile(r"^/sessions/(?P<sid>\d+)/complete$"), "complete"),
    ("POST", re.compile(r"^/sessions/(?P<sid>\d+)/abort$"), "abort"),
    ("POST", re.compile(r"^/sessions/(?P<sid>\d+)/assist$"), "assist"),
    ("GET", re.compile(r"^/collab$"), "list_collabs"),
    ("GET", re.compile(r"^/collab/(?P<cid>\d+)$"), "get_collab"),
    ("POST", re.compile(r"^/collab/(?P<cid>\d+)/indications$"), "post_indication"),
    ("GET", re.compile(r"^/collab/(?P<cid>\d+)/indications$"), "poll_indications"),
    ("POST", re.compile(r"^/collab/(?P<cid>\d+)/close$"), "close_collab"),
    ("GET", re.compile(r"^/experts$"), "list_experts"),
    ("GET", re.compile(r"^/machines$"), "list_machines"),
    ("GET", re.compile(r"^/machines/(?P<mid>\d+)/context$"), "machine_context"),
    ("POST", re.compile(r"^/machines/(?P<mid>\d+)/sync$"), "machine_sync"),
    ("GET", re.compile(r"^/tags$"), "list_tags"),
    ("GET", re.compile(r"^/workflows/(?P<wid>\d+)$"), "get_workflow"),
    ("GET", re.compile(r"^/trace/parts/(?P<id>\d+)$"), "trace_parts"),
    ("GET", re.compile(r"^/trace/tools/(?P<id>\d+)$"), "trace_tools"),
    ("GET", re.compile(r"^/trace/sessions/(?P<sid>\d+)$"), "trace_session"),
    ("GET", re.compile(r"^/trace/replay/(?P<sid>\d+)$"), "trace_replay"),
    ("GET", re.compile(r"^/trace/digest$"), "trace_digest"),
    ("GET", re.compile(r"^/connectivity$"), "get_connectivity"),
    ("POST", re.compile(r"^/connectivity$"), "set_connectivity"),
]

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".png": "image/png",
    ".svg": "image/svg+xml",
}


class _Handler(BaseHTTPRequestHandler):
    app: AppState
    ui_dir: Path | None = None
    protocol_version = "HTTP/1.1"

    # quiet by default; the CLI enables logging when asked
    def log_message(self, fmt, *args):
        pass

    # -- plumbing ---------------------------------------------------------------

    def _send_json(self, status: int, doc) -> None:
        body = json.dumps(doc, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_error_body(self, status: int, code: str, message: str, detail: str = "") -> None:
        self._send_json(status, {"code": code, "message": message, "detail": detail})

    def _read_body(self) -> dict:
        if not self._raw_body:
            return {}
        try:
            doc = json.loads(self._raw_body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"request body is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ParseError("request body must be a JSON object")
        return doc

    def _dispatch(self, method: str) -> None:
        # Drain the body up front: with keep-alive, unread bytes would
        # corrupt the next request on the connection.
        length = int(self.headers.get("Content-Length") or 0)
        self._raw_body = self.rfile.read(length) if length else b""
        parsed = urlparse(self.path)
        query = {k: v[0] for k, v in parse_qs(parsed.query).items()}
        if method == "OPTIONS":
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        if method == "GET" and parsed.path.startswith("/ui"):
            self._serve_static(parsed.path)
            return
        for m, pattern, name in _ROUTES:
            if m != method:
                continue
            match = pattern.match(parsed.path)
            if not match:
                continue
            try:
                handler = getattr(self, f"ep_{name}")
                handler(match.groupdict(), query)
            except HmtdError as exc:
                status = _STATUS_BY_CODE.get(exc.code, 400)
                self._send_error_body(status, exc.code, exc.message, exc.detail)
            except Exception as exc:  # pragma: no cover - defensive
                self._send_error_body(500, "InternalError", str(exc))
            return
        self._send_error_body(404, "NotFound", f"no route for {method} {parsed.path}")

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_OPTIONS(self):
        self._dispatch("OPTIONS")

    def _serve_static(self, path: str) -> None:
        if self.ui_dir is None:
            self._send_error_body(404, "NotFound", "no UI bundle configured")
            return
        rel = path[len("/ui") :].lstrip("/") or "technician.html"
        target = (self.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            self._send_error_body(404, "NotFound", f"no static file {rel}")
            return
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", _CONTENT_TYPES.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    # -- endpoints ------------------------------------------------------------

    def ep_health(self, params, query):
        self._send_json(200, {"status": "ok", "events": len(self.app.ledger)})

    def ep_create_session(self, params, query):
        body = self._read_body()
        session = self.app.create_session(int(body["badge-id"]), int(body["workflow-id"]))
        self._send_json(201, self.app.session_json(session))

    def ep_list_sessions(self, params, query):
        docs = [self.app.session_json(s) for s in self.app.sessions.values()]
        docs.sort(key=lambda d: d["session-id"])
        self._send_json(200, {"sessions": docs})

    def ep_get_session(self, params, query):
        self._send_json(200, self.app.session_json(self.app.session(int(params["sid"]))))

    def ep_bind(self, params, query):
        body = self._read_body()
        machine_id = body.get("machine-id")
        self._send_json(
            200,
            self.app.bind(
                int(params["sid"]),
                int(machine_id) if machine_id is not None else None,
                body.get("machine-tag-file"),
            ),
        )

    def ep_scan(self, params, query):
        body = self._read_body()
        self._send_json(
            200, self.app.scan(int(params["sid"]), str(body["kind"]), int(body["tag-id"]))
        )

    def ep_defect(self, params, query):
        body = self._read_body()
        self._send_json(
            200,
            self.app.report_defect(
                int(params["sid"]), int(body["part-id"]), int(body["replacement-id"])
            ),
        )

    def ep_complete(self, params, query):
        self._send_json(200, self.app.complete(int(params["sid"])))

    def ep_abort(self, params, query):
        self._send_json(200, self.app.abort(int(params["sid"])))

    def ep_assist(self, params, query):
        body = self._read_body()
        collab = self.app.open_assistance(int(params["sid"]), str(body["expert-id"]))
        self._send_json(201, self.app.collab_json(collab, with_snapshot=True))

    def ep_list_collabs(self, params, query):
        docs = [self.app.collab_json(c) for c in self.app.collabs.sessions()]
        docs.sort(key=lambda d: d["collab-id"])
        self._send_json(200, {"collabs": docs})

    def ep_get_collab(self, params, query):
        collab = self.app.collabs.get(int(params["cid"]))
        self._send_json(200, self.app.collab_json(collab, with_snapshot=True))

    def ep_post_indication(self, params, query):
        body = self._read_body()
        seq = self.app.send_indication(
            int(params["cid"]), str(body.get("kind")), body.get("payload") or {}
        )
        self._send_json(201, {"seq": seq})

    def ep_poll_indications(self, params, query):
        collab = self.app.collabs.get(int(params["cid"]))
        after = int(query.get("after", 0))
        wait = min(float(query.get("wait", LONG_POLL_CAP_SECONDS)), LONG_POLL_CAP_SECONDS)
        items = self.app.collabs.poll_indications(collab, after, wait)
        self._send_json(
            200,
            {
                "state": collab.state.value,
                "indications": [i.to_json_dict() for i in items],
            },
        )

    def ep_close_collab(self, params, query):
        collab = self.app.collabs.get(int(params["cid"]))
        self.app.collabs.close(collab)
        self._send_json(200, self.app.collab_json(collab))

    def ep_list_experts(self, params, query):
        docs = [
            {"expert-id": eid, "name": name}
            for eid, name in sorted(self.app.world.experts.items())
        ]
        self._send_json(200, {"experts": docs})

    def ep_list_machines(self, params, query):
        docs = []
        for mid in self.app.world.sgdt.machine_ids():
            record = self.app.world.sgdt.get(mid)
            docs.append(
                {
                    "machine-id": mid,
                    "name": record.characteristics.name,
                    "model": record.characteristics.model,
                    "location": record.characteristics.location,
                }
            )
        self._send_json(200, {"machines": docs})

    def ep_machine_context(self, params, query):
        badge = int(query.get("badge", 0)) or None
        bundle, provenance = self.app.resolve_context(
            int(params["mid"]), badge or 0, query.get("mode")
        )
        self._send_json(200, contextmod.bundle_to_dict(bundle, provenance))

    def ep_machine_sync(self, params, query):
        tag = self.app.world.load_tag(TagKind.MACHINE, int(params["mid"]))
        record = contextmod.sync_tag(tag, self.app.world.sgdt)
        self._send_json(200, {"machine-id": record.machine_id, "history-length": len(record.history)})

    def ep_list_tags(self, params, query):
        docs = [
            {"kind": ident.kind.name.title(), "tag-id": ident.entity_id}
            for ident in self.app.world.tag_identities()
        ]
        self._send_json(200, {"tags": docs})

    def ep_get_workflow(self, params, query):
        wf = self.app.world.workflows.get(int(params["wid"]))
        if wf is None:
            self._send_error_body(404, "NotFound", f"no workflow {params['wid']}")
            return
        self._send_json(200, engine.workflow_to_dict(wf))

    def ep_trace_parts(self, params, query):
        events = self.app.ledger.part_history(int(params["id"]))
        self._send_json(200, {"events": [self.app.event_json(e) for e in events]})

    def ep_trace_tools(self, params, query):
        events = self.app.ledger.tool_usage(int(params["id"]))
        self._send_json(200, {"events": [self.app.event_json(e) for e in events]})

    def ep_trace_session(self, params, query):
        events = self.app.ledger.session_events(int(params["sid"]))
        self._send_json(200, {"events": [self.app.event_json(e) for e in events]})

    def ep_trace_replay(self, params, query):
        summary = self.app.ledger.replay(int(params["sid"]))
        self._send_json(
            200,
            {
                "session-id": summary.session_id,
                "operator-badge-id": summary.operator_badge_id,
                "workflow-id": summary.workflow_id,
                "machine-id": summary.machine_id,
                "phase": summary.phase.value,
                "step-cursor": summary.step_cursor,
                "scan-substate": summary.scan_substate.value,
                "defect-count": summary.defect_count,
                "replaced-parts": {str(k): v for k, v in sorted(summary.replaced_parts.items())},
                "start-time": summary.start_time,
                "end-time": summary.end_time,
            },
        )

    def ep_trace_digest(self, params, query):
        self._send_json(200, {"digest": self.app.ledger.digest(), "events": len(self.app.ledger)})

    def ep_get_connectivity(self, params, query):
        self._send_json(200, {"mode": self.app.connectivity.value})

    def ep_set_connectivity(self, params, query):
        body = self._read_body()
        mode = self.app.set_connectivity(str(body.get("mode", "")))
        self._send_json(200, {"mode": mode.value})


class Service:
    """A running HTTP service bound to a port."""

    def __init__(self, app: AppState, port: int, ui_dir: Path | None = None, host: str = "127.0.0.1"):
        handler = type("BoundHandler", (_Handler,), {"app": app, "ui_dir": ui_dir})
        try:
            self.httpd = ThreadingHTTPServer((host, port), handler)
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
        self.app = app
        self.port = self.httpd.server_address[1]
        self._thread: threading.Thread | None = None

    def start_background(self) -> "Service":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def shutdown(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)
        self.app.close()


def serve(config: ServiceConfig, connectivity: str = "Online") -> Service:
    """Build the app state and bind the service; callers choose how to run it."""
    data_dir = Path(config.data_dir)
    if not data_dir.is_dir():
        raise ConfigError(f"data directory does not exist: {data_dir}")
    probe = data_dir / ".write-probe"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise DataDirUnwritable(f"data directory is not writable: {exc}") from exc
    app = AppState(
        data_dir,
        clock=parse_clock_spec(config.clock_spec),
        platform_id=config.platform_id,
        connectivity=contextmod.Connectivity(connectivity.title()),
    )
    return Service(app, config.port, ui_dir=config.ui_dir)
