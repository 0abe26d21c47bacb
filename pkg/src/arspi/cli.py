"""``arspi`` command line.

Exit codes: 0 success or clean, 1 warnings, 2 validation errors, 3 usage
or rule violation, 4 store error. Commands that change the project save it
only when they succeed.
"""

from __future__ import annotations

import functools
import json
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator

import click

from arspi import lifecycle, release_change, repository, tailoring, validation
from arspi.errors import ArspiError, FindingsError, StoreError
from arspi.metamodel import (
    ArtefactKind,
    ItemKind,
    completeness_ratio,
    dump_catalog,
)
from arspi.model import (
    OPEN_CHANGE_STATES,
    ChangeOrigin,
    ChangeStatus,
    IterationInputs,
    LinkKind,
    ReleaseStatus,
    TailoringProfile,
)
from arspi.validation import Finding

PROJECT_ENV = "ARSPI_PROJECT"

EXIT_OK = 0
EXIT_WARNINGS = 1
EXIT_ERRORS = 2
EXIT_USAGE = 3
EXIT_STORE = 4


@dataclass
class CommandResult:
    exit_code: int
    stdout_payload: str = ""
    findings: list[Finding] = field(default_factory=list)
    message: str = ""


@dataclass
class _Options:
    project: Path = Path(".")
    as_json: bool = False


def _common(fn: Callable) -> Callable:
    """Accept ``--project`` and ``--json`` on every leaf command as well as on the group."""

    @click.option("--project", "-p", "project", type=click.Path(path_type=Path), default=None, help="Project directory.")
    @click.option("--json", "as_json", is_flag=True, default=False, help="Structured output.")
    @functools.wraps(fn)
    def wrapper(*args: Any, project: Path | None, as_json: bool, **kwargs: Any) -> Any:
        opts = click.get_current_context().find_object(_Options)
        if project is not None:
            opts.project = project
        opts.as_json = opts.as_json or as_json
        return fn(opts, *args, **kwargs)

    return wrapper


def _dump(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2)


def _out(opts: _Options, data: Any, text: str, code: int = EXIT_OK) -> CommandResult:
    return CommandResult(code, _dump(data) if opts.as_json else text)


@contextmanager
def _store(opts: _Options, *, write: bool = False) -> Iterator[repository.ProjectStore]:
    with repository.open_project(opts.project, write=write) as store:
        yield store


def _parse_kind(text: str) -> ArtefactKind:
    try:
        return ArtefactKind.parse(text)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--kind") from None


@click.group()
@click.option("--project", "-p", type=click.Path(path_type=Path), envvar=PROJECT_ENV, default=".", show_default=True, help=f"Project directory (env {PROJECT_ENV}).")
@click.option("--json", "as_json", is_flag=True, help="Structured output.")
@click.pass_context
def cli(ctx: click.Context, project: Path, as_json: bool) -> None:
    """Set up, check and evolve artefact-based SPI projects."""
    ctx.obj = _Options(project, as_json)


# -- init / tailor / catalog -------------------------------------------------------


@cli.command()
@click.option("--name", required=True)
@click.option("--vision", default="")
@click.option("--merge/--no-merge", default=False, help="Use one unified PD instead of CPD and TPD.")
@_common
def init(opts: _Options, name: str, vision: str, merge: bool) -> CommandResult:
    """Create an empty project directory."""
    store = repository.init_project(opts.project, name, TailoringProfile(merge_designs=merge), vision=vision)
    data = {"project": str(opts.project), "name": name, "profile": store.profile.to_dict()}
    return _out(opts, data, f"initialised {name} in {opts.project}")


@cli.command()
@click.option("--scale", type=click.Choice([s.value for s in tailoring.ProjectScale]), prompt="Project scale")
@click.option("--preexisting/--no-preexisting", default=None, prompt="Is there a pre-existing process?")
@click.option("--training/--no-training", default=None, prompt="Is training needed?")
@click.option("--process-line/--no-process-line", "process_line", default=None, prompt="Is the process part of a process line?")
@click.option("--iterations", type=click.IntRange(min=1), prompt="Planned iterations")
@click.option("--merge/--no-merge", default=None, help="Override the scale rule for design merging.")
@click.option("--dry-run", is_flag=True, help="Print the profile without applying it.")
@_common
def tailor(
    opts: _Options,
    scale: str,
    preexisting: bool,
    training: bool,
    process_line: bool,
    iterations: int,
    merge: bool | None,
    dry_run: bool,
) -> CommandResult:
    """Derive a tailoring profile from the set-up questionnaire and apply it."""
    answers = tailoring.QuestionnaireAnswers(scale, preexisting, training, process_line, iterations)
    profile = tailoring.derive_profile(answers, merge=merge)
    plan = tailoring.iteration_plan(answers)
    data: dict[str, Any] = {"profile": profile.to_dict(), "plan": plan, "applied": not dry_run, "created": []}
    if not dry_run:
        with _store(opts, write=True) as store:
            created = tailoring.apply_profile(store, profile)
            lifecycle.plan_project(store, len(plan), plan)
            data["created"] = [a.id for a in created]
    lines = [
        f"merge_designs: {profile.merge_designs}",
        f"selected_supports: {', '.join(sorted(profile.selected_supports)) or '-'}",
        f"strict_realisation_coverage: {profile.strict_realisation_coverage}",
        f"plan: {', '.join('shortened' if s else 'full' for s in plan)}",
        "dry run, nothing applied" if dry_run else f"applied; created {', '.join(data['created']) or 'no artefacts'}",
    ]
    return _out(opts, data, "\n".join(lines))


@cli.group()
def catalog() -> None:
    """Artefact catalog."""


@catalog.command("dump")
@_common
def catalog_dump(opts: _Options) -> CommandResult:
    """Print the key artefact section structures."""
    data = dump_catalog()
    lines: list[str] = []

    def emit(sections: list[dict], depth: int) -> None:
        for s in sections:
            shared = f"  (shared with {', '.join(s['shared_with'])})" if s["shared_with"] else ""
            lines.append(f"{'  ' * depth}- {s['key']}: {s['title']}{shared}")
            emit(s["children"], depth + 1)

    for entry in data:
        lines.append(f"{entry['kind']} {entry['title']}")
        emit(entry["sections"], 1)
        if not entry["sections"]:
            lines.append("  (structure defined by release content)")
    return _out(opts, data, "\n".join(lines))


# -- artefacts -------------------------------------------------------------------


@cli.group()
def artefact() -> None:
    """Create, edit and inspect artefacts."""


@artefact.command("new")
@click.option("--kind", "kind_text", required=True, help="PRQ, CPD, TPD, PD, PLC, PR or SUPPORT:<name>.")
@click.option("--name", required=True)
@_common
def artefact_new(opts: _Options, kind_text: str, name: str) -> CommandResult:
    kind = _parse_kind(kind_text)
    with _store(opts, write=True) as store:
        art = repository.create_artefact(store, kind, name)
    return _out(opts, art.to_dict(), f"created {art.id} ({art.kind}) {art.name}")


@artefact.command("set")
@click.argument("artefact_id")
@click.argument("section_key")
@click.option("--add-item", "add_items", multiple=True, help="Append an item with this text.")
@click.option("--item-kind", type=click.Choice([k.value for k in ItemKind]), default=ItemKind.NOTE.value)
@click.option("--clear", is_flag=True, help="Remove existing items first.")
@_common
def artefact_set(opts: _Options, artefact_id: str, section_key: str, add_items: tuple[str, ...], item_kind: str, clear: bool) -> CommandResult:
    """Edit a section addressed by key or dotted key path."""
    with _store(opts, write=True) as store:
        if clear:
            repository.set_section_texts(store, artefact_id, section_key, [], ItemKind(item_kind))
        added = [repository.add_item(store, artefact_id, section_key, item_kind, text) for text in add_items]
        art = repository.get_artefact(store, artefact_id)
    data = {"artefact": art.to_dict(), "added": [i.to_dict() for i in added]}
    text = "\n".join([f"{i.id} {i.kind.value}: {i.text}" for i in added] + [f"{art.id} now at version {art.version}"])
    return _out(opts, data, text)


def _render_artefact(art) -> str:
    lines = [f"{art.id} {art.kind} {art.name!r} v{art.version}"]

    def emit(sections, depth):
        for s in sections:
            lines.append(f"{'  ' * depth}[{s.spec_key}]")
            for item in s.items:
                lines.append(f"{'  ' * (depth + 1)}{item.id} ({item.kind.value}) {item.text}")
            emit(s.children, depth + 1)

    emit(art.sections, 1)
    return "\n".join(lines)


@artefact.command("show")
@click.argument("artefact_id")
@_common
def artefact_show(opts: _Options, artefact_id: str) -> CommandResult:
    with _store(opts) as store:
        art = repository.get_artefact(store, artefact_id)
    return _out(opts, art.to_dict(), _render_artefact(art))


@artefact.command("list")
@click.option("--kind", "kind_text", default=None)
@_common
def artefact_list(opts: _Options, kind_text: str | None) -> CommandResult:
    with _store(opts) as store:
        arts = repository.list_artefacts(store, kind_text)
    data = [{"id": a.id, "kind": str(a.kind), "name": a.name, "version": a.version} for a in arts]
    return _out(opts, data, "\n".join(f"{a.id}\t{a.kind}\tv{a.version}\t{a.name}" for a in arts))


# -- tracing -----------------------------------------------------------------------


@cli.group("trace")
def trace_group() -> None:
    """Trace links between artefact elements."""


@trace_group.command("add")
@click.argument("source")
@click.argument("target")
@click.option("--kind", type=click.Choice([k.value for k in LinkKind]), required=True)
@click.option("--no-sync", is_flag=True, help="Leave RequirementsTracing sections untouched.")
@_common
def trace_add(opts: _Options, source: str, target: str, kind: str, no_sync: bool) -> CommandResult:
    with _store(opts, write=True) as store:
        link = repository.trace(store, source, target, kind)
        if not no_sync:
            validation.sync_shared_sections(store)
    return _out(opts, link.to_dict(), f"{link.id}: {link.source} {link.kind.value} {link.target}")


@trace_group.command("list")
@_common
def trace_list(opts: _Options) -> CommandResult:
    with _store(opts) as store:
        links = list(store.links)
    return _out(opts, [l.to_dict() for l in links], "\n".join(f"{l.id}\t{l.source}\t{l.kind.value}\t{l.target}" for l in links))


@trace_group.command("sync")
@_common
def trace_sync(opts: _Options) -> CommandResult:
    """Regenerate shared sections (Goals, RequirementsTracing) from their sources."""
    with _store(opts, write=True) as store:
        updated = validation.sync_shared_sections(store)
    return _out(opts, {"updated": updated}, f"updated {', '.join(updated) or 'nothing'}")


# -- validation ----------------------------------------------------------------------


@cli.command("validate")
@_common
def validate_cmd(opts: _Options) -> CommandResult:
    """Check completeness and consistency."""
    with _store(opts) as store:
        findings = validation.validate(store)
    code = validation.exit_status(findings)
    if opts.as_json:
        payload = "\n".join(json.dumps(f.to_dict(), sort_keys=True) for f in findings)
    else:
        payload = "\n".join(str(f) for f in findings) or "clean"
    return CommandResult(code, payload, findings)


# -- iterations and phases --------------------------------------------------------------


@cli.group()
def iteration() -> None:
    """Plan, start and close iterations."""


def _flags(text: str) -> list[bool]:
    truthy = {"1", "true", "yes", "y", "shortened", "s"}
    falsy = {"0", "false", "no", "n", "full", "f"}
    flags = []
    for part in filter(None, (p.strip().lower() for p in text.split(","))):
        if part not in truthy | falsy:
            raise click.BadParameter(f"cannot read {part!r} as a shortened flag", param_hint="--shortened")
        flags.append(part in truthy)
    return flags


@iteration.command("plan")
@click.option("--count", type=int, required=True)
@click.option("--shortened", "shortened_text", default="", help="Comma list, e.g. true,false,false.")
@_common
def iteration_plan(opts: _Options, count: int, shortened_text: str) -> CommandResult:
    flags = _flags(shortened_text) if shortened_text else [False] * count
    with _store(opts, write=True) as store:
        planned = lifecycle.plan_project(store, count, flags)
    return _out(
        opts,
        [it.to_dict() for it in planned],
        "\n".join(f"iteration {it.index}: {'shortened' if it.shortened else 'full'}" for it in planned),
    )


@iteration.command("start")
@click.option("--change", "changes", multiple=True, help="Accepted change request to work on.")
@click.option("--vision", default="")
@click.option("--actual-process", default=None)
@click.option("--shortened/--full", default=None, help="Override the planned iteration type.")
@_common
def iteration_start(opts: _Options, changes: tuple[str, ...], vision: str, actual_process: str | None, shortened: bool | None) -> CommandResult:
    with _store(opts, write=True) as store:
        it = lifecycle.start_iteration(store, IterationInputs(vision, set(changes), actual_process), shortened)
    kind = "shortened" if it.shortened else "full"
    return _out(opts, it.to_dict(), f"iteration {it.index} ({kind}) started in {it.current_phase.value}")


@iteration.command("close")
@click.option("--index", type=int, default=None)
@_common
def iteration_close(opts: _Options, index: int | None) -> CommandResult:
    with _store(opts, write=True) as store:
        it = lifecycle.close_iteration(store, index)
    return _out(opts, it.to_dict(), f"iteration {it.index} closed")


@cli.group()
def phase() -> None:
    """Phase status and transitions."""


@phase.command("status")
@_common
def phase_status(opts: _Options) -> CommandResult:
    with _store(opts) as store:
        status = lifecycle.iteration_status(store)
    if status["running"] is None:
        text = "no iteration running"
    else:
        text = f"iteration {status['running']} in {status['phase']}" + (" (shortened)" if status["shortened"] else "")
    return _out(opts, status, text)


@phase.command("advance")
@click.option("--index", type=int, default=None)
@_common
def phase_advance(opts: _Options, index: int | None) -> CommandResult:
    with _store(opts, write=True) as store:
        it = store.iteration(index) if index is not None else store.running_iteration()
        reached = lifecycle.advance_phase(store, index)
    state = it.state.value
    return _out(opts, it.to_dict(), f"iteration {it.index} {state} in {reached.value}")


# -- releases, changes, delta ------------------------------------------------------------


@cli.group()
def release() -> None:
    """Package and promote process releases."""


def _release_line(rel) -> str:
    return f"{rel.id}\t{rel.version_label}\titeration {rel.iteration_index}\t{rel.status.value}"


@release.command("package")
@click.option("--label", required=True, help="Version label, free form.")
@click.option("--iteration", "index", type=int, default=None)
@_common
def release_package(opts: _Options, label: str, index: int | None) -> CommandResult:
    with _store(opts, write=True) as store:
        rel = release_change.package_release(store, label, index)
    return _out(opts, rel.to_dict(), _release_line(rel))


@release.command("promote")
@click.argument("release_id")
@_common
def release_promote(opts: _Options, release_id: str) -> CommandResult:
    with _store(opts, write=True) as store:
        rel = release_change.promote(store, release_id)
    return _out(opts, rel.to_dict(), _release_line(rel))


@release.command("list")
@_common
def release_list(opts: _Options) -> CommandResult:
    with _store(opts) as store:
        rels = list(store.releases)
    return _out(opts, [r.to_dict() for r in rels], "\n".join(_release_line(r) for r in rels))


@cli.group()
def change() -> None:
    """Change request queue."""


def _change_line(cr) -> str:
    return f"{cr.id}\t{cr.status.value}\t{cr.origin.value}\t{cr.title}"


@change.command("submit")
@click.option("--title", required=True)
@click.option("--description", default="")
@click.option("--origin", type=click.Choice([o.value for o in ChangeOrigin]), default=ChangeOrigin.INTERNAL.value)
@click.option("--asset", "assets", multiple=True)
@_common
def change_submit(opts: _Options, title: str, description: str, origin: str, assets: tuple[str, ...]) -> CommandResult:
    with _store(opts, write=True) as store:
        cr = release_change.submit_change(store, origin, title, description, assets)
    return _out(opts, cr.to_dict(), _change_line(cr))


@change.command("triage")
@click.argument("change_id")
@click.argument("decision", type=click.Choice(["accept", "reject"]))
@_common
def change_triage(opts: _Options, change_id: str, decision: str) -> CommandResult:
    with _store(opts, write=True) as store:
        cr = release_change.triage_change(store, change_id, decision)
    return _out(opts, cr.to_dict(), _change_line(cr))


@change.command("list")
@click.option("--status", type=click.Choice([s.value for s in ChangeStatus]), default=None)
@_common
def change_list(opts: _Options, status: str | None) -> CommandResult:
    with _store(opts) as store:
        crs = [cr for cr in store.changes if status is None or cr.status.value == status]
    return _out(opts, [cr.to_dict() for cr in crs], "\n".join(_change_line(cr) for cr in crs))


@cli.command()
@click.argument("old_snapshot", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("new_snapshot", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--ingest", is_flag=True, help="Also file update-trigger change requests.")
@_common
def delta(opts: _Options, old_snapshot: Path, new_snapshot: Path, ingest: bool) -> CommandResult:
    """Impact of upstream reference-process changes on the local trace graph."""
    old = release_change.load_snapshot(old_snapshot)
    new = release_change.load_snapshot(new_snapshot)
    changed = release_change.changed_assets(old, new)
    data: dict[str, Any] = {"changed_assets": sorted(changed), "report": None, "changes": [], "recorded": None}
    if not changed:
        return _out(opts, data, "no upstream changes")
    with _store(opts, write=True) as store:
        report = release_change.compute_delta(store, changed)
        recorded = release_change.persist_delta_report(store, report, f"{new.label} {new.version}".strip())
        if ingest:
            data["changes"] = [cr.to_dict() for cr in release_change.ingest_update_trigger(store, old, new)]
    data["report"] = report.to_dict()
    data["recorded"] = recorded.id if recorded else None
    lines = [
        f"changed: {', '.join(sorted(report.changed_assets))}",
        f"affected: {', '.join(sorted(report.affected_local)) or '-'}",
        f"edges: {', '.join(report.closure_edges) or '-'}",
    ]
    lines += [f"filed {cr['id']}: {cr['title']}" for cr in data["changes"]]
    return _out(opts, data, "\n".join(lines))


# -- report ---------------------------------------------------------------------------


def build_report(store: repository.ProjectStore) -> dict[str, Any]:
    running = store.running_iteration()
    released = [r for r in store.releases if r.status is ReleaseStatus.RELEASED]
    last = store.releases[-1] if store.releases else None
    return {
        "project": store.manifest.project_name,
        "vision": store.manifest.vision,
        "profile": store.profile.to_dict(),
        "actual_process": store.manifest.actual_process_ref,
        "iteration": running.index if running else None,
        "phase": running.current_phase.value if running and running.current_phase else None,
        "iterations": {state: sum(1 for it in store.iterations if it.state.value == state) for state in ("planned", "running", "closed")},
        "artefacts": [
            {"id": a.id, "kind": str(a.kind), "version": a.version, "completeness": round(100 * completeness_ratio(a), 1)}
            for a in store.artefacts.values()
        ],
        "open_changes": [cr.id for cr in store.changes if cr.status in OPEN_CHANGE_STATES],
        "last_release": last.to_dict() if last else None,
        "released_count": len(released),
    }


@cli.command()
@_common
def report(opts: _Options) -> CommandResult:
    """Project status summary."""
    with _store(opts) as store:
        data = build_report(store)
    lines = [
        f"project: {data['project']}",
        f"iteration: {data['iteration'] or 'none'}" + (f" in {data['phase']}" if data["phase"] else ""),
        f"artefacts: {len(data['artefacts'])}",
    ]
    lines += [f"  {a['id']} {a['kind']} v{a['version']} {a['completeness']:.0f}% complete" for a in data["artefacts"]]
    lines.append(f"open changes: {', '.join(data['open_changes']) or 'none'}")
    last = data["last_release"]
    lines.append(f"last release: {last['id']} {last['version_label']} ({last['status']})" if last else "last release: none")
    lines.append(f"actual process: {data['actual_process'] or 'none'}")
    return _out(opts, data, "\n".join(lines))


# -- entry points --------------------------------------------------------------------


def _findings_text(findings: list[Finding]) -> str:
    return "\n".join(str(f) for f in findings)


def run(argv: list[str]) -> CommandResult:
    try:
        result = cli.main(args=list(argv), prog_name="arspi", standalone_mode=False)
    except click.UsageError as exc:
        usage = exc.ctx.get_usage() if exc.ctx is not None else "Usage: arspi [OPTIONS] COMMAND [ARGS]..."
        return CommandResult(EXIT_USAGE, message=f"{usage}\nError: {exc.format_message()}")
    except click.Abort:
        return CommandResult(EXIT_USAGE, message="aborted")
    except FindingsError as exc:
        return CommandResult(EXIT_ERRORS, _findings_text(exc.findings), exc.findings, f"{type(exc).__name__}: {exc}")
    except StoreError as exc:
        return CommandResult(EXIT_STORE, message=f"{type(exc).__name__}: {exc}")
    except ArspiError as exc:
        return CommandResult(EXIT_USAGE, message=f"{type(exc).__name__}: {exc}")
    except ValueError as exc:
        return CommandResult(EXIT_USAGE, message=f"error: {exc}")
    if isinstance(result, CommandResult):
        return result
    # --help and bare groups print through click and return an int or None
    return CommandResult(result if isinstance(result, int) else EXIT_OK)


def main(argv: list[str] | None = None) -> None:
    result = run(sys.argv[1:] if argv is None else argv)
    if result.stdout_payload:
        click.echo(result.stdout_payload)
    if result.message:
        click.echo(result.message, err=True)
    sys.exit(result.exit_code)


if __name__ == "__main__":
    main()
