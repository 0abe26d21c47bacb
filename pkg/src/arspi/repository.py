"""File-backed project store.

Layout of a project directory::

    arspi.json              manifest (commit point of every save)
    artefacts/<id>.json     one file per artefact
    links.json              trace links
    iterations.json
    changes.json
    releases.json
    .arspi.lock             advisory single-writer lock
    .arspi.journal          present only while a save is in flight

All files are UTF-8 JSON with sorted keys. A save first writes every changed
file next to its target as ``<name>.pending``, then records them in the
journal, then replaces the manifest (the commit), then moves the pending
files into place. ``load`` reads pending files only when the journal
generation matches the manifest, so an interrupted save yields either the
previous or the new store.
"""

from __future__ import annotations

import copy
import json
import os
import re
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import filelock

from arspi.errors import (
    CorruptFile,
    DanglingEndpoint,
    DuplicateId,
    ItemPlacementError,
    KindMatrixViolation,
    PathOccupied,
    ProfileInvalid,
    ProjectNotFound,
    SchemaMismatch,
    StoreLocked,
    UnknownChange,
    UnknownId,
    UnknownIteration,
)
from arspi.metamodel import (
    Artefact,
    ArtefactKind,
    ContentItem,
    ItemKind,
    KindCode,
    Section,
    SupportArtefactDescriptor,
    SupportRegistry,
    ensure_permitted,
    ensure_structure,
    item_allowed,
    new_artefact,
)
from arspi.model import (
    ARTEFACT_NODE,
    SCHEMA_VERSION,
    ChangeRequest,
    Iteration,
    IterationState,
    LinkKind,
    ProjectManifest,
    Release,
    TailoringProfile,
    TraceLink,
    link_permitted,
)

MANIFEST_NAME = "arspi.json"
ARTEFACT_DIR = "artefacts"
LOCK_NAME = ".arspi.lock"
JOURNAL_NAME = ".arspi.journal"
PENDING_SUFFIX = ".pending"
DEFAULT_LOCK_TIMEOUT = 5.0

_COLLECTION_FILES = ("links.json", "iterations.json", "changes.json", "releases.json")


@dataclass
class ProjectStore:
    manifest: ProjectManifest
    artefacts: dict[str, Artefact] = field(default_factory=dict)
    links: list[TraceLink] = field(default_factory=list)
    iterations: list[Iteration] = field(default_factory=list)
    changes: list[ChangeRequest] = field(default_factory=list)
    releases: list[Release] = field(default_factory=list)
    registry: SupportRegistry = field(default_factory=SupportRegistry)
    root_path: Path | None = field(default=None, compare=False)

    @property
    def profile(self) -> TailoringProfile:
        return self.manifest.profile

    # -- lookups -------------------------------------------------------------

    def element_owner(self) -> dict[str, str]:
        """Map every element id (artefacts and items) to its owning artefact id."""
        owners: dict[str, str] = {}
        for art in self.artefacts.values():
            owners[art.id] = art.id
            for item_id in art.item_ids():
                owners[item_id] = art.id
        return owners

    def node_types(self) -> dict[str, str]:
        """Map element ids to ``artefact`` or the content item kind."""
        types: dict[str, str] = {}
        for art in self.artefacts.values():
            types[art.id] = ARTEFACT_NODE
            for _, item in art.items():
                types[item.id] = item.kind.value
        return types

    def find_item(self, item_id: str) -> tuple[Artefact, Section, ContentItem] | None:
        for art in self.artefacts.values():
            for section, item in art.items():
                if item.id == item_id:
                    return art, section, item
        return None

    def running_iteration(self) -> Iteration | None:
        return next((it for it in self.iterations if it.state is IterationState.RUNNING), None)

    def iteration(self, index: int) -> Iteration:
        for it in self.iterations:
            if it.index == index:
                return it
        raise UnknownIteration(f"no iteration {index}")

    def change(self, change_id: str) -> ChangeRequest:
        for cr in self.changes:
            if cr.id == change_id:
                return cr
        raise UnknownChange(f"no change request {change_id}")

    def release(self, release_id: str) -> Release:
        for rel in self.releases:
            if rel.id == release_id:
                return rel
        raise UnknownId(f"no release {release_id}")

    def allocate_id(self, prefix: str) -> str:
        pattern = re.compile(rf"^{re.escape(prefix)}-(\d+)$")
        used = [
            *self.artefacts,
            *(item_id for art in self.artefacts.values() for item_id in art.item_ids()),
            *(link.id for link in self.links),
            *(cr.id for cr in self.changes),
            *(rel.id for rel in self.releases),
        ]
        top = max((int(m.group(1)) for u in used if (m := pattern.match(u))), default=0)
        return f"{prefix}-{top + 1}"


# -- creation ---------------------------------------------------------------------


def _check_profile(profile: TailoringProfile, registry: SupportRegistry) -> None:
    unknown = sorted(name for name in profile.selected_supports if name not in registry)
    if unknown:
        raise ProfileInvalid(f"unknown support artefacts selected: {', '.join(unknown)}")


def init_project(
    root_path: str | Path,
    name: str,
    profile: TailoringProfile | None = None,
    *,
    vision: str = "",
) -> ProjectStore:
    root = Path(root_path)
    if root.exists() and (not root.is_dir() or any(root.iterdir())):
        raise PathOccupied(f"{root} is not empty")
    profile = profile or TailoringProfile()
    if not name.strip():
        raise ProfileInvalid("project name must not be empty")
    registry = SupportRegistry()
    _check_profile(profile, registry)
    store = ProjectStore(
        ProjectManifest(project_name=name, profile=profile, vision=vision),
        registry=registry,
        root_path=root,
    )
    root.mkdir(parents=True, exist_ok=True)
    save(store)
    return store


# -- artefacts --------------------------------------------------------------------


def _kind_matches(kind: ArtefactKind, wanted: ArtefactKind | KindCode | str | None) -> bool:
    if wanted is None:
        return True
    if isinstance(wanted, str) and not isinstance(wanted, KindCode):
        if wanted.strip().upper() == KindCode.SUPPORT.value:
            return kind.is_support
        wanted = ArtefactKind.parse(wanted)
    if isinstance(wanted, KindCode):
        return kind.code is wanted
    if wanted.is_support and wanted.support_name is None:
        return kind.is_support
    return kind == wanted


def put_artefact(store: ProjectStore, artefact: Artefact) -> Artefact:
    """Commit ``artefact`` into the store and return the stored copy.

    Replacing an existing artefact bumps its version by one; a new artefact
    keeps the version it was created with. The running iteration, if any,
    records the artefact as produced.
    """
    ensure_permitted(artefact.kind, store.profile)
    if artefact.kind.is_support:
        store.registry.get(artefact.kind.support_name or "")
    ensure_structure(artefact)

    previous = store.artefacts.get(artefact.id)
    if previous is not None and previous.kind != artefact.kind:
        raise DuplicateId(f"{artefact.id} already names a {previous.kind} artefact")
    owners = store.element_owner()
    if owners.get(artefact.id, artefact.id) != artefact.id:
        raise DuplicateId(f"{artefact.id} already names a content item")
    seen: set[str] = set()
    for item_id in artefact.item_ids():
        if item_id in seen or item_id == artefact.id or owners.get(item_id, artefact.id) != artefact.id:
            raise DuplicateId(f"content item id {item_id} is not unique in the project")
        seen.add(item_id)

    stored = copy.deepcopy(artefact)
    stored.version = previous.version + 1 if previous is not None else max(1, artefact.version)
    store.artefacts[stored.id] = stored
    running = store.running_iteration()
    if running is not None:
        running.produced.add(stored.id)
    return copy.deepcopy(stored)


def get_artefact(store: ProjectStore, artefact_id: str) -> Artefact:
    try:
        return copy.deepcopy(store.artefacts[artefact_id])
    except KeyError:
        raise UnknownId(f"no artefact {artefact_id}") from None


def list_artefacts(
    store: ProjectStore, kind: ArtefactKind | KindCode | str | None = None
) -> list[Artefact]:
    return [copy.deepcopy(a) for a in store.artefacts.values() if _kind_matches(a.kind, kind)]


def create_artefact(store: ProjectStore, kind: ArtefactKind, name: str) -> Artefact:
    prefix = "SUP" if kind.is_support else kind.code.value
    artefact = new_artefact(
        kind, name, store.profile, registry=store.registry, artefact_id=store.allocate_id(prefix)
    )
    return put_artefact(store, artefact)


def add_item(
    store: ProjectStore,
    artefact_id: str,
    section_key: str,
    kind: ItemKind | str,
    text: str,
    *,
    item_id: str | None = None,
) -> ContentItem:
    """Append a content item to a section, creating free-form sections on dynamic kinds."""
    artefact = get_artefact(store, artefact_id)
    section = artefact.section(section_key)
    if section is None:
        if not artefact.kind.is_dynamic:
            raise UnknownId(f"{artefact_id} has no section {section_key}")
        section = Section(section_key)
        artefact.sections.append(section)
    item = ContentItem(item_id or store.allocate_id("I"), ItemKind(kind), text)
    if not item_allowed(artefact.kind, section.spec_key, item.kind):
        raise ItemPlacementError(
            f"{item.kind.value} item not allowed in {artefact.kind}.{section.spec_key}"
        )
    section.items.append(item)
    put_artefact(store, artefact)
    return item


def set_section_texts(
    store: ProjectStore,
    artefact_id: str,
    section_key: str,
    texts: list[str],
    kind: ItemKind = ItemKind.NOTE,
) -> Artefact:
    """Replace a section's items with fresh items carrying ``texts``."""
    artefact = get_artefact(store, artefact_id)
    section = artefact.section(section_key)
    if section is None:
        if not artefact.kind.is_dynamic:
            raise UnknownId(f"{artefact_id} has no section {section_key}")
        section = Section(section_key)
        artefact.sections.append(section)
    first = int(store.allocate_id("I").rsplit("-", 1)[1])
    section.items = [ContentItem(f"I-{first + n}", kind, text) for n, text in enumerate(texts)]
    return put_artefact(store, artefact)


# -- tracing -------------------------------------------------------------------------


def add_trace(store: ProjectStore, link: TraceLink) -> TraceLink:
    """Record a trace link; an identical (source, target, kind) link is returned as-is."""
    types = store.node_types()
    for end in (link.source, link.target):
        if end not in types:
            raise DanglingEndpoint(f"trace endpoint {end} does not exist")
    if not link_permitted(types[link.source], types[link.target], link.kind):
        raise KindMatrixViolation(
            f"{link.kind.value} link not allowed from {types[link.source]} to {types[link.target]}"
        )
    for existing in store.links:
        if existing.triple == link.triple:
            return existing
    if not link.id or any(existing.id == link.id for existing in store.links):
        link = TraceLink(store.allocate_id("L"), link.source, link.target, link.kind)
    store.links.append(link)
    return link


def trace(store: ProjectStore, source: str, target: str, kind: LinkKind | str) -> TraceLink:
    return add_trace(store, TraceLink("", source, target, LinkKind(kind)))


def register_support(store: ProjectStore, descriptor: SupportArtefactDescriptor) -> SupportRegistry:
    return store.registry.register(descriptor)


# -- serialisation --------------------------------------------------------------------


def _dumps(payload: Any) -> bytes:
    return (json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _manifest_payload(store: ProjectStore, generation: int) -> dict[str, Any]:
    m = store.manifest
    return {
        "project_name": m.project_name,
        "profile": m.profile.to_dict(),
        "vision": m.vision,
        "actual_process_ref": m.actual_process_ref,
        "schema_version": m.schema_version,
        "generation": generation,
        "artefacts": list(store.artefacts),
        "supports": [d.to_dict() for d in store.registry.custom()],
    }


def store_files(store: ProjectStore) -> dict[str, bytes]:
    """Serialised data files keyed by path relative to the project root (manifest excluded)."""
    files = {
        f"{ARTEFACT_DIR}/{art.id}.json": _dumps(art.to_dict()) for art in store.artefacts.values()
    }
    files["links.json"] = _dumps({"links": [link.to_dict() for link in store.links]})
    files["iterations.json"] = _dumps({"iterations": [it.to_dict() for it in store.iterations]})
    files["changes.json"] = _dumps({"changes": [cr.to_dict() for cr in store.changes]})
    files["releases.json"] = _dumps({"releases": [rel.to_dict() for rel in store.releases]})
    return files


def to_dict(store: ProjectStore) -> dict[str, Any]:
    """Whole-store structured view, used for fingerprints and ``--json`` output."""
    return {
        "manifest": _manifest_payload(store, 0) | {"generation": None},
        "artefacts": [a.to_dict() for a in store.artefacts.values()],
        "links": [link.to_dict() for link in store.links],
        "iterations": [it.to_dict() for it in store.iterations],
        "changes": [cr.to_dict() for cr in store.changes],
        "releases": [rel.to_dict() for rel in store.releases],
    }


def fingerprint(store: ProjectStore) -> str:
    return json.dumps(to_dict(store), sort_keys=True)


# Every filesystem mutation goes through these two functions so tests can
# inject a crash after any single write.


def _write_bytes(path: Path, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())


def _replace(src: Path, dst: Path) -> None:
    os.replace(src, dst)


def _remove(path: Path) -> None:
    path.unlink(missing_ok=True)


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    _write_bytes(tmp, data)
    _replace(tmp, path)


def _read_json(path: Path) -> Any:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CorruptFile(path, "file missing") from None
    except UnicodeDecodeError as exc:
        raise CorruptFile(path, f"not UTF-8: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptFile(path, exc.msg, exc.lineno) from None


def _journal(root: Path) -> dict[str, Any] | None:
    path = root / JOURNAL_NAME
    if not path.exists():
        return None
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return {"generation": int(data["generation"]), "files": list(data["files"])}
    except (ValueError, KeyError, TypeError):
        # a torn journal never committed: the manifest is replaced only after it
        return None


def _manifest_generation(root: Path) -> int:
    path = root / MANIFEST_NAME
    if not path.exists():
        return 0
    data = _read_json(path)
    return int(data.get("generation", 0)) if isinstance(data, dict) else 0


def _recover(root: Path) -> None:
    """Finish or discard an interrupted save before starting a new one."""
    journal = _journal(root)
    committed = journal is not None and journal["generation"] == _manifest_generation(root)
    if committed:
        for rel in journal["files"]:
            pending = root / (rel + PENDING_SUFFIX)
            if pending.exists():
                _replace(pending, root / rel)
    for stale in list(root.glob("*" + PENDING_SUFFIX)) + list(
        (root / ARTEFACT_DIR).glob("*" + PENDING_SUFFIX)
    ):
        _remove(stale)
    for tmp in list(root.glob("*.tmp")) + list((root / ARTEFACT_DIR).glob("*.tmp")):
        _remove(tmp)
    _remove(root / JOURNAL_NAME)


def save(store: ProjectStore, root_path: str | Path | None = None) -> None:
    """Persist ``store``; callers that share a directory must hold :func:`project_lock`."""
    root = Path(root_path) if root_path is not None else store.root_path
    if root is None:
        raise ProjectNotFound("store has no root path")
    for art in store.artefacts.values():
        ensure_structure(art)
    root.mkdir(parents=True, exist_ok=True)
    (root / ARTEFACT_DIR).mkdir(exist_ok=True)
    _recover(root)

    generation = _manifest_generation(root) + 1
    files = store_files(store)
    pending: list[str] = []
    for rel, data in files.items():
        target = root / rel
        if target.exists() and target.read_bytes() == data:
            continue
        _write_bytes(root / (rel + PENDING_SUFFIX), data)
        pending.append(rel)
    _atomic_write(root / JOURNAL_NAME, _dumps({"generation": generation, "files": pending}))
    _atomic_write(root / MANIFEST_NAME, _dumps(_manifest_payload(store, generation)))
    for rel in pending:
        _replace(root / (rel + PENDING_SUFFIX), root / rel)
    keep = {f"{art_id}.json" for art_id in store.artefacts}
    for path in sorted((root / ARTEFACT_DIR).glob("*.json")):
        if path.name not in keep:
            _remove(path)
    _remove(root / JOURNAL_NAME)
    store.root_path = root


def _field(path: Path, data: Any, key: str, kind: type) -> Any:
    if not isinstance(data, dict) or key not in data:
        raise CorruptFile(path, f"missing key {key!r}")
    value = data[key]
    if not isinstance(value, kind):
        raise CorruptFile(path, f"key {key!r} must be {kind.__name__}")
    return value


def load(root_path: str | Path) -> ProjectStore:
    root = Path(root_path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise ProjectNotFound(f"no {MANIFEST_NAME} in {root}")
    raw = _read_json(manifest_path)
    version = raw.get("schema_version") if isinstance(raw, dict) else None
    if version != SCHEMA_VERSION:
        raise SchemaMismatch(f"{manifest_path}: schema_version {version!r}, engine supports {SCHEMA_VERSION}")

    generation = int(raw.get("generation", 0))
    journal = _journal(root)
    fresh = set(journal["files"]) if journal and journal["generation"] == generation else set()

    def resolve(rel: str) -> Path:
        pending = root / (rel + PENDING_SUFFIX)
        if rel in fresh and pending.exists():
            return pending
        return root / rel

    try:
        profile = TailoringProfile.from_dict(_field(manifest_path, raw, "profile", dict))
        registry = SupportRegistry([SupportArtefactDescriptor.from_dict(d) for d in raw.get("supports", [])])
        manifest = ProjectManifest(
            project_name=_field(manifest_path, raw, "project_name", str),
            profile=profile,
            vision=raw.get("vision", ""),
            actual_process_ref=raw.get("actual_process_ref"),
            schema_version=version,
        )
        order = _field(manifest_path, raw, "artefacts", list)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(manifest_path, str(exc)) from None

    store = ProjectStore(manifest, registry=registry, root_path=root)
    for art_id in order:
        path = resolve(f"{ARTEFACT_DIR}/{art_id}.json")
        try:
            art = Artefact.from_dict(_read_json(path))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptFile(path, str(exc)) from None
        if art.id != art_id:
            raise CorruptFile(path, f"artefact id {art.id} does not match file name")
        store.artefacts[art.id] = art

    loaders = {
        "links.json": ("links", TraceLink.from_dict, store.links),
        "iterations.json": ("iterations", Iteration.from_dict, store.iterations),
        "changes.json": ("changes", ChangeRequest.from_dict, store.changes),
        "releases.json": ("releases", Release.from_dict, store.releases),
    }
    for rel in _COLLECTION_FILES:
        key, parse, target = loaders[rel]
        path = resolve(rel)
        if not path.exists():
            continue
        entries = _field(path, _read_json(path), key, list)
        try:
            target.extend(parse(entry) for entry in entries)
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptFile(path, str(exc)) from None
    return store


@contextmanager
def project_lock(root_path: str | Path, timeout: float = DEFAULT_LOCK_TIMEOUT) -> Iterator[None]:
    """Hold the project's advisory single-writer lock; raise StoreLocked after ``timeout``."""
    root = Path(root_path)
    if not root.is_dir():
        raise ProjectNotFound(f"{root} is not a project directory")
    lock = filelock.FileLock(str(root / LOCK_NAME), timeout=timeout)
    try:
        lock.acquire()
    except filelock.Timeout:
        raise StoreLocked(f"{root} is locked by another writer") from None
    try:
        yield
    finally:
        lock.release()


@contextmanager
def open_project(root_path: str | Path, *, write: bool = False, timeout: float = DEFAULT_LOCK_TIMEOUT) -> Iterator[ProjectStore]:
    """Load a store under the lock; with ``write`` the store is saved if the block succeeds."""
    with project_lock(root_path, timeout):
        store = load(root_path)
        yield store
        if write:
            save(store)
