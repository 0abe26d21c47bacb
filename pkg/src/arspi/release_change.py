"""Release pipeline, change-request queue and process-line delta analysis."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from arspi.errors import (
    AlreadyReleased,
    CorruptFile,
    EmptyChangeSet,
    InvalidTriageState,
    MissingLinkedAssets,
    NotReady,
    SnapshotMismatch,
    WrongPhase,
)
from arspi.metamodel import (
    PR,
    SPL_DELTA_REPORT,
    Artefact,
    ArtefactKind,
    ContentItem,
    ItemKind,
    KindCode,
    Section,
    new_artefact,
)
from arspi.model import (
    ChangeOrigin,
    ChangeRequest,
    ChangeStatus,
    LinkKind,
    Phase,
    Release,
    ReleaseStatus,
    TraceLink,
)
from arspi.repository import ProjectStore, create_artefact, put_artefact
from arspi.validation import check_release_readiness, errors

# Link kinds along which a change propagates, walked from target to source.
IMPACT_LINK_KINDS: frozenset[LinkKind] = frozenset(
    {LinkKind.DERIVES_FROM, LinkKind.REFINES, LinkKind.REALISES, LinkKind.ADDRESSES}
)


# -- releases ---------------------------------------------------------------------


def _payload_sections(store: ProjectStore) -> list[tuple[str, list[Artefact]]]:
    arts = list(store.artefacts.values())
    design = KindCode.PD if store.profile.merge_designs else KindCode.TPD
    selected = store.profile.selected_supports
    return [
        ("ProcessDesign", [a for a in arts if a.kind.code is design]),
        ("LifeCycleSupport", [a for a in arts if a.kind.code is KindCode.PLC]),
        ("SupportArtefacts", [a for a in arts if a.kind.is_support and a.kind.support_name in selected]),
    ]


def package_release(store: ProjectStore, version_label: str, iteration: int | None = None) -> Release:
    """Create the iteration's PR artefact and record a release in review."""
    it = store.iteration(iteration) if iteration is not None else store.running_iteration()
    if it is None or not it.running or it.current_phase is not Phase.DEPLOYMENT:
        where = "no iteration is running" if it is None else f"iteration {it.index} is not in Deployment"
        raise WrongPhase(f"releases are packaged in Deployment; {where}")
    blocking = errors(check_release_readiness(store, it.index))
    if blocking:
        raise NotReady(f"iteration {it.index} is not ready for release", blocking)

    pr = new_artefact(PR, f"Process Release {version_label}", store.profile, artefact_id=store.allocate_id("PR"))
    payload: set[str] = set()
    first = int(store.allocate_id("I").rsplit("-", 1)[1])
    for key, arts in _payload_sections(store):
        if not arts:
            continue
        items = []
        for art in arts:
            items.append(ContentItem(f"I-{first}", ItemKind.ASSET, f"{art.id}: {art.name} (v{art.version})"))
            first += 1
            payload.add(art.id)
        pr.sections.append(Section(key, items))
    pr = put_artefact(store, pr)
    payload.add(pr.id)
    release = Release(
        id=store.allocate_id("REL"),
        version_label=version_label,
        iteration_index=it.index,
        status=ReleaseStatus.REVIEW,
        payload=payload,
        parent_ref=it.inputs.actual_process,
    )
    store.releases.append(release)
    return release


def promote(store: ProjectStore, release_id: str) -> Release:
    """review -> beta -> release_candidate -> released; the last step publishes the Actual Process."""
    release = store.release(release_id)
    successor = release.status.successor()
    if successor is None:
        raise AlreadyReleased(f"{release.id} is already released")
    release.status = successor
    if successor is ReleaseStatus.RELEASED:
        store.iteration(release.iteration_index).released = release.id
        store.manifest.actual_process_ref = release.id
    return release


# -- change requests --------------------------------------------------------------


def submit_change(
    store: ProjectStore,
    origin: ChangeOrigin | str,
    title: str,
    description: str = "",
    linked_assets: Iterable[str] = (),
) -> ChangeRequest:
    origin = ChangeOrigin(origin)
    assets = set(linked_assets)
    if origin is ChangeOrigin.EXTERNAL_UPDATE_TRIGGER and not assets:
        raise MissingLinkedAssets("update-trigger changes must name the changed upstream assets")
    cr = ChangeRequest(store.allocate_id("CR"), origin, title, description, ChangeStatus.SUBMITTED, assets)
    store.changes.append(cr)
    return cr


def triage_change(store: ProjectStore, change_id: str, decision: str) -> ChangeRequest:
    cr = store.change(change_id)
    if cr.status is not ChangeStatus.SUBMITTED:
        raise InvalidTriageState(f"{cr.id} is {cr.status.value}; only submitted changes are triaged")
    if decision == "accept":
        cr.status = ChangeStatus.ACCEPTED
    elif decision == "reject":
        cr.status = ChangeStatus.REJECTED
    else:
        raise ValueError(f"decision must be 'accept' or 'reject', not {decision!r}")
    return cr


# -- reference process snapshots -------------------------------------------------


@dataclass(frozen=True)
class ReferenceProcessSnapshot:
    """Content hashes of a reference process's assets; ``label`` names the process."""

    label: str
    assets: dict[str, str] = field(default_factory=dict)
    version: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label, "version": self.version, "assets": dict(sorted(self.assets.items()))}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ReferenceProcessSnapshot:
        assets = data["assets"]
        if not isinstance(assets, dict):
            raise TypeError("assets must map asset id to hash")
        return cls(str(data["label"]), {str(k): str(v) for k, v in assets.items()}, str(data.get("version", "")))


def load_snapshot(path: str | Path) -> ReferenceProcessSnapshot:
    path = Path(path)
    try:
        return ReferenceProcessSnapshot.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise CorruptFile(path, exc.msg, exc.lineno) from None
    except (KeyError, TypeError, AttributeError) as exc:
        raise CorruptFile(path, f"not a snapshot: {exc}") from None


def changed_assets(old: ReferenceProcessSnapshot, new: ReferenceProcessSnapshot) -> set[str]:
    if old.label != new.label:
        raise SnapshotMismatch(f"snapshots of different processes: {old.label!r} vs {new.label!r}")
    ids = old.assets.keys() | new.assets.keys()
    return {a for a in ids if old.assets.get(a) != new.assets.get(a)}


def _components(links: Iterable[TraceLink], edge_kinds: frozenset[LinkKind]) -> dict[str, int]:
    adjacency: dict[str, set[str]] = {}
    for link in links:
        if link.kind in edge_kinds:
            adjacency.setdefault(link.source, set()).add(link.target)
            adjacency.setdefault(link.target, set()).add(link.source)
    label: dict[str, int] = {}
    for start in sorted(adjacency):
        if start in label:
            continue
        label[start] = len(label)
        component = label[start]
        queue = deque([start])
        while queue:
            node = queue.popleft()
            for nxt in adjacency[node]:
                if nxt not in label:
                    label[nxt] = component
                    queue.append(nxt)
    return label


def group_changed_assets(
    store: ProjectStore, assets: Iterable[str], edge_kinds: frozenset[LinkKind] = IMPACT_LINK_KINDS
) -> list[set[str]]:
    """Partition assets by connected component of the undirected trace graph."""
    label = _components(store.links, edge_kinds)
    groups: dict[object, set[str]] = {}
    for asset in sorted(assets):
        groups.setdefault(label.get(asset, ("alone", asset)), set()).add(asset)
    return sorted(groups.values(), key=min)


def ingest_update_trigger(
    store: ProjectStore,
    old: ReferenceProcessSnapshot,
    new: ReferenceProcessSnapshot,
    edge_kinds: frozenset[LinkKind] = IMPACT_LINK_KINDS,
) -> list[ChangeRequest]:
    """One external change request per connected group of changed upstream assets."""
    changed = changed_assets(old, new)
    created = []
    for group in group_changed_assets(store, changed, edge_kinds):
        version = f" {new.version}" if new.version else ""
        created.append(
            submit_change(
                store,
                ChangeOrigin.EXTERNAL_UPDATE_TRIGGER,
                f"Update trigger from {new.label}{version}: {', '.join(sorted(group))}",
                f"Upstream assets changed between {old.version or 'previous'} and {new.version or 'current'} snapshot.",
                group,
            )
        )
    return created


# -- delta analysis -----------------------------------------------------------------


@dataclass(frozen=True)
class DeltaReport:
    changed_assets: frozenset[str]
    affected_local: frozenset[str]
    closure_edges: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "changed_assets": sorted(self.changed_assets),
            "affected_local": sorted(self.affected_local),
            "closure_edges": list(self.closure_edges),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> DeltaReport:
        return cls(frozenset(data["changed_assets"]), frozenset(data["affected_local"]), tuple(data["closure_edges"]))


def compute_delta(
    store: ProjectStore, changed: Iterable[str], edge_kinds: frozenset[LinkKind] = IMPACT_LINK_KINDS
) -> DeltaReport:
    """Elements reachable from ``changed`` against the direction of impact links.

    A changed asset is itself reported as affected only when another changed
    element reaches it through the closure.
    """
    seeds = frozenset(changed)
    if not seeds:
        raise EmptyChangeSet("compute_delta needs at least one changed asset")
    incoming: dict[str, list[TraceLink]] = {}
    for link in store.links:
        if link.kind in edge_kinds:
            incoming.setdefault(link.target, []).append(link)

    affected: set[str] = set()
    expanded = set(seeds)
    walked: list[str] = []
    walked_ids: set[str] = set()
    queue = deque(sorted(seeds))
    while queue:
        node = queue.popleft()
        for link in sorted(incoming.get(node, ()), key=lambda l: (l.id, l.source)):
            if link.id not in walked_ids:
                walked_ids.add(link.id)
                walked.append(link.id)
            affected.add(link.source)
            if link.source not in expanded:
                expanded.add(link.source)
                queue.append(link.source)
    return DeltaReport(seeds, frozenset(affected), tuple(walked))


def persist_delta_report(store: ProjectStore, report: DeltaReport, label: str = "") -> Artefact | None:
    """Write ``report`` into the SPLDeltaReport artefact when tailoring selected it."""
    if SPL_DELTA_REPORT not in store.profile.selected_supports:
        return None
    kind = ArtefactKind.support(SPL_DELTA_REPORT)
    art = next((a for a in store.artefacts.values() if a.kind == kind), None)
    if art is None:
        art = create_artefact(store, kind, SPL_DELTA_REPORT)
    art = Artefact.from_dict(art.to_dict())
    first = int(store.allocate_id("I").rsplit("-", 1)[1])
    rows = {
        "ChangedAssets": sorted(report.changed_assets),
        "AffectedElements": sorted(report.affected_local),
        "ClosureEdges": list(report.closure_edges),
    }
    art.sections = []
    if label:
        art.sections.append(Section("Reference", [ContentItem(f"I-{first}", ItemKind.NOTE, label)]))
        first += 1
    for key, values in rows.items():
        items = [ContentItem(f"I-{first + n}", ItemKind.NOTE, v) for n, v in enumerate(values)]
        first += len(values)
        art.sections.append(Section(key, items))
    return put_artefact(store, art)
