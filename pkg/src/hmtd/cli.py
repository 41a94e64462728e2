"""Command line interface.

Exit codes: 0 success, 1 scenario deviation, 2 configuration/usage error.
``HMTD_DATA`` overrides ``--data`` wherever a data directory is needed.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from . import __version__
from .clock import iso, parse_clock_spec
from .errors import HmtdError, ParseError
from .ledger import TraceLedger
from .scenario import ScenarioDeviation, load_script, run_scenario, transcript_bytes
from .service import AppState, ServiceConfig, serve
from .tags import TagIdentity, TagKind, init_tag, load_tag
from .taskmodel import (
    continuity_score,
    derive_configurations,
    load_devices,
    load_irvo,
    load_task_tree,
    validate_irvo,
)

CONFIG_ERROR = 2
SCENARIO_ERROR = 1


def _data_dir(option_value: str | None) -> Path:
    value = os.environ.get("HMTD_DATA") or option_value
    if not value:
        raise click.UsageError("no data directory: pass --data or set HMTD_DATA")
    return Path(value)


def _fail(exc: HmtdError, exit_code: int = CONFIG_ERROR):
    click.echo(f"error: {exc.code}: {exc.message}", err=True)
    sys.exit(exit_code)


@click.group()
@click.version_option(__version__, prog_name="hmtd")
def main():
    """Maintenance interventions with prescribed scans, in-situ tag storage,
    full traceability, remote assistance, and interaction-model analysis."""


# -- serve -----------------------------------------------------------------


@main.command("serve")
@click.option("--port", default=8471, show_default=True, type=int)
@click.option("--data", "data_opt", type=click.Path(), help="data directory (or HMTD_DATA)")
@click.option("--clock", "clock_spec", default="wall", show_default=True,
              help='"wall" or "fixed[:<start-minutes>[:<step>]]"')
@click.option("--platform", default="config-1", show_default=True,
              help="device-configuration id reported in resolved contexts")
@click.option("--ui", "ui_dir", type=click.Path(), default=None,
              help="directory of static UI files served under /ui")
@click.option("--offline", is_flag=True, help="start with connectivity Offline")
def serve_cmd(port, data_opt, clock_spec, platform, ui_dir, offline):
    """Run the HTTP service."""
    try:
        config = ServiceConfig(
            data_dir=_data_dir(data_opt),
            port=port,
            clock_spec=clock_spec,
            platform_id=platform,
            ui_dir=Path(ui_dir) if ui_dir else None,
        )
        service = serve(config, connectivity="Offline" if offline else "Online")
    except HmtdError as exc:
        _fail(exc)
    click.echo(f"listening on 127.0.0.1:{service.port} data={config.data_dir}")
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        service.shutdown()


# -- run --------------------------------------------------------------------


@main.command()
@click.argument("script", type=click.Path(exists=True))
@click.option("--data", "data_opt", type=click.Path(), help="data directory (or HMTD_DATA)")
@click.option("--clock", "clock_spec", default="fixed", show_default=True)
@click.option("--platform", default="config-1", show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="write the transcript here instead of stdout")
@click.option("--expect", "expect_path", type=click.Path(exists=True), default=None,
              help="golden transcript; mismatch exits 1")
def run(script, data_opt, clock_spec, platform, out_path, expect_path):
    """Execute a scenario script against a data directory."""
    try:
        doc = load_script(script)
        app = AppState(
            _data_dir(data_opt), clock=parse_clock_spec(clock_spec), platform_id=platform
        )
    except HmtdError as exc:
        _fail(exc)
    try:
        transcript = run_scenario(doc, app)
    except ScenarioDeviation as exc:
        click.echo(f"scenario deviation: {exc.message}", err=True)
        sys.exit(SCENARIO_ERROR)
    except ParseError as exc:
        _fail(exc)
    finally:
        app.close()
    payload = transcript_bytes(transcript)
    if out_path:
        Path(out_path).write_bytes(payload)
        click.echo(f"transcript written to {out_path}")
    else:
        click.echo(payload.decode("utf-8"), nl=False)
    if expect_path:
        golden = Path(expect_path).read_bytes()
        if payload != golden:
            click.echo("transcript deviates from the golden file", err=True)
            sys.exit(SCENARIO_ERROR)
        click.echo("transcript matches the golden file")


# -- tag ---------------------------------------------------------------------


@main.group()
def tag():
    """Inspect and create tag snapshot files."""


@tag.command("make")
@click.argument("kind")
@click.argument("entity_id", type=int)
@click.argument("path", type=click.Path())
def tag_make(kind, entity_id, path):
    """Create an initialized tag snapshot."""
    try:
        identity = TagIdentity(TagKind[kind.upper()], entity_id)
    except KeyError:
        click.echo(f"error: unknown tag kind {kind!r} "
                   f"(machine, part, tool, badge)", err=True)
        sys.exit(CONFIG_ERROR)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(CONFIG_ERROR)
    Path(path).write_bytes(init_tag(identity).data)
    click.echo(f"wrote {identity.persisted_id} tag to {path}")


@tag.command("dump")
@click.argument("path", type=click.Path(exists=True))
def tag_dump(path):
    """Print a tag's header fields and decoded history records."""
    try:
        t = load_tag(path)
        ident = t.read_identity()
    except HmtdError as exc:
        _fail(exc)
    click.echo(f"kind:         {ident.kind.name.title()}")
    click.echo(f"entity-id:    {ident.entity_id}")
    click.echo(f"record-count: {t.record_count}")
    click.echo(f"head-index:   {t.head_index}")
    click.echo(f"status-flags: 0x{t.status_flags:02x}"
               + (" (defective)" if t.defective else ""))
    if ident.kind is TagKind.MACHINE:
        for i, r in enumerate(t.read_history()):
            click.echo(
                f"  [{i}] intervention={r.intervention_id} badge={r.operator_badge_id} "
                f"workflow={r.workflow_id} start={iso(r.start_time)} end={iso(r.end_time)} "
                f"outcome={r.outcome.name} defects={r.defect_count} steps={r.step_count}"
            )


# -- trace ---------------------------------------------------------------------


def _open_ledger(data_opt) -> TraceLedger:
    data = _data_dir(data_opt)
    path = data / "trace.log"
    if not path.exists():
        click.echo(f"error: no trace log at {path}", err=True)
        sys.exit(CONFIG_ERROR)
    return TraceLedger(path)


def _print_events(events):
    if not events:
        click.echo("(no events)")
        return
    click.echo(f"{'seq':>5}  {'time':16}  {'kind':24} {'session':>7}  detail")
    for e in events:
        click.echo(
            f"{e.seq:>5}  {iso(e.timestamp):16}  {e.kind.value:24} {e.session_id:>7}  {e.detail}"
        )


@main.group()
def trace():
    """Query the trace ledger."""


@trace.command("parts")
@click.argument("part_id", type=int)
@click.option("--data", "data_opt", type=click.Path())
def trace_parts(part_id, data_opt):
    """Every operation that touched a part."""
    ledger = _open_ledger(data_opt)
    try:
        _print_events(ledger.part_history(part_id))
    finally:
        ledger.close()


@trace.command("tools")
@click.argument("tool_id", type=int)
@click.option("--data", "data_opt", type=click.Path())
def trace_tools(tool_id, data_opt):
    """Every use of a tool."""
    ledger = _open_ledger(data_opt)
    try:
        _print_events(ledger.tool_usage(tool_id))
    finally:
        ledger.close()


@trace.command("replay")
@click.argument("session_id", type=int)
@click.option("--data", "data_opt", type=click.Path())
def trace_replay(session_id, data_opt):
    """Reconstruct a session's final state from its events."""
    ledger = _open_ledger(data_opt)
    try:
        summary = ledger.replay(session_id)
    except HmtdError as exc:
        ledger.close()
        _fail(exc)
    ledger.close()
    click.echo(f"session:       {summary.session_id}")
    click.echo(f"operator:      {summary.operator_badge_id}")
    click.echo(f"workflow:      {summary.workflow_id}")
    click.echo(f"machine:       {summary.machine_id}")
    click.echo(f"phase:         {summary.phase.value}")
    click.echo(f"step-cursor:   {summary.step_cursor}")
    click.echo(f"scan-substate: {summary.scan_substate.value}")
    click.echo(f"defects:       {summary.defect_count}")
    if summary.replaced_parts:
        pairs = ", ".join(f"{k}->{v}" for k, v in sorted(summary.replaced_parts.items()))
        click.echo(f"replacements:  {pairs}")


# -- analyze ------------------------------------------------------------------


@main.group()
def analyze():
    """Interaction-model and device-configuration analysis."""


@analyze.command("irvo")
@click.argument("model_path", type=click.Path(exists=True))
def analyze_irvo(model_path):
    """Validate a model and print its continuity score."""
    try:
        model = load_irvo(model_path)
    except HmtdError as exc:
        _fail(exc)
    violations = validate_irvo(model)
    if violations:
        click.echo(f"{len(violations)} violation(s):")
        for v in violations:
            click.echo(f"  [{v.code}] {v.message}")
        sys.exit(SCENARIO_ERROR)
    click.echo("model is structurally valid")
    click.echo(f"continuity score: {continuity_score(model)} perception source(s)")


@analyze.command("devices")
@click.argument("tree_path", type=click.Path(exists=True))
@click.argument("referential_path", type=click.Path(exists=True))
def analyze_devices(tree_path, referential_path):
    """Derive minimal device configurations covering a task tree's needs."""
    try:
        tree = load_task_tree(tree_path)
        referential = load_devices(referential_path)
        configs = derive_configurations(tree, referential)
    except HmtdError as exc:
        _fail(exc)
    needs = ", ".join(sorted(m.value for m in tree.needs()))
    click.echo(f"needs: {needs or '(none)'}")
    for i, cfg in enumerate(configs, start=1):
        click.echo(f"config-{i}: {', '.join(cfg.devices) or '(no devices)'}")


@analyze.command("report")
@click.option("--irvo", "irvo_paths", multiple=True, type=click.Path(exists=True),
              help="interaction model document (repeatable)")
@click.option("--tree", "tree_path", type=click.Path(exists=True), default=None)
@click.option("--devices", "devices_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def analyze_report(irvo_paths, tree_path, devices_path, out_dir):
    """Render figures and CSV tables for the analysis results."""
    from .report import write_analysis_report

    if not irvo_paths and not (tree_path and devices_path):
        click.echo("error: nothing to report; pass --irvo and/or --tree with --devices", err=True)
        sys.exit(CONFIG_ERROR)
    try:
        models = {Path(p).stem: load_irvo(p) for p in irvo_paths}
        tree = load_task_tree(tree_path) if tree_path else None
        referential = load_devices(devices_path) if devices_path else None
        written = write_analysis_report(models, tree, referential, out_dir)
    except HmtdError as exc:
        _fail(exc)
    for path in written:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
