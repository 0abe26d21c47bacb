"""Builders, random generators and independent oracles shared by the tests."""

from __future__ import annotations

import random
import string
from pathlib import Path

from arspi import lifecycle, release_change, repository, tailoring, validation
from arspi.metamodel import (
    CPD,
    PD,
    PLC,
    PR,
    PRQ,
    TPD,
    ArtefactKind,
    empty_required_sections,
    ContentItem,
    ItemKind,
    KindCode,
    Section,
    SupportRegistry,
    new_artefact,
)
from arspi.model import (
    ChangeOrigin,
    ChangeRequest,
    ChangeStatus,
    Iteration,
    IterationInputs,
    IterationState,
    LinkKind,
    Phase,
    ProjectManifest,
    Release,
    ReleaseStatus,
    TailoringProfile,
    TraceLink,
)
from arspi.repository import ProjectStore

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: list[str] = []


def record(number: int, title: str, passed: bool, seconds: float, limit: float, detail: str = "") -> None:
    verdict = "PASS" if passed and seconds < limit else "FAIL"
    line = f"[{verdict}] criterion {number}: {title} ({seconds:.2f}s, limit {limit:g}s){' - ' + detail if detail else ''}"
    ACCEPTANCE.append(line)
    print(line)


MERGED = TailoringProfile(merge_designs=True)
SPLIT = TailoringProfile(merge_designs=False)

# item kinds that fit each section, used when filling empty sections
_FILL_KIND = {
    "Requirements": ItemKind.REQUIREMENT,
    "Goals": ItemKind.GOAL,
}


def memory_store(profile: TailoringProfile = SPLIT, name: str = "demo") -> ProjectStore:
    return ProjectStore(ProjectManifest(project_name=name, profile=profile), registry=SupportRegistry())


def fill_empty(store: ProjectStore, artefact_id: str, label: str = "") -> None:
    """Put one item into every required section that is still empty."""
    art = store.artefacts[artefact_id]
    for key in empty_required_sections(art):
        kind = _FILL_KIND.get(key, ItemKind.NOTE)
        if key == "RequirementsTracing":
            continue
        repository.add_item(store, artefact_id, key, kind, f"{label or art.kind} {key}")


def complete_prq(store: ProjectStore, requirements: int = 1) -> tuple[str, list[str]]:
    prq = repository.create_artefact(store, PRQ, "Process Requirements")
    repository.add_item(store, prq.id, "Goals", ItemKind.GOAL, "Reach CMMI level 3")
    reqs = [
        repository.add_item(store, prq.id, "Requirements", ItemKind.REQUIREMENT, f"requirement {n}").id
        for n in range(requirements)
    ]
    fill_empty(store, prq.id)
    return prq.id, reqs


def complete_design(store: ProjectStore, requirements: list[str]) -> tuple[str, list[str], list[str]]:
    """Merged project: one PD addressing every requirement, each design element realised."""
    pd = repository.create_artefact(store, PD, "Process Design")
    designs, realisations = [], []
    for n, req in enumerate(requirements):
        d = repository.add_item(store, pd.id, "Processes", ItemKind.DESIGN_ELEMENT, f"design {n}")
        t = repository.add_item(
            store, pd.id, "LogicalAndPhysicalModelOrganisation", ItemKind.REALISATION_ELEMENT, f"realisation {n}"
        )
        repository.trace(store, req, d.id, LinkKind.ADDRESSES)
        repository.trace(store, d.id, t.id, LinkKind.REALISES)
        designs.append(d.id)
        realisations.append(t.id)
    fill_empty(store, pd.id)
    validation.sync_shared_sections(store)
    return pd.id, designs, realisations


def complete_split_designs(store: ProjectStore, requirements: list[str]) -> tuple[str, str]:
    cpd = repository.create_artefact(store, CPD, "Conceptual Process Design")
    tpd = repository.create_artefact(store, TPD, "Technical Process Design")
    for n, req in enumerate(requirements):
        d = repository.add_item(store, cpd.id, "Processes", ItemKind.DESIGN_ELEMENT, f"design {n}")
        t = repository.add_item(store, tpd.id, "Processes", ItemKind.REALISATION_ELEMENT, f"realisation {n}")
        repository.trace(store, req, d.id, LinkKind.ADDRESSES)
        repository.trace(store, d.id, t.id, LinkKind.REALISES)
    fill_empty(store, cpd.id)
    fill_empty(store, tpd.id)
    validation.sync_shared_sections(store)
    return cpd.id, tpd.id


def complete_plc(store: ProjectStore) -> str:
    plc = repository.create_artefact(store, PLC, "Life Cycle Support")
    fill_empty(store, plc.id)
    return plc.id


def minimal_ready_store(plan: list[bool], profile: TailoringProfile = MERGED) -> ProjectStore:
    """Merged store whose PRQ, PD and PLC pass every phase gate."""
    store = memory_store(profile)
    _, reqs = complete_prq(store, 1)
    complete_design(store, reqs)
    complete_plc(store)
    lifecycle.plan_project(store, len(plan), plan)
    return store


# -- independent oracles -----------------------------------------------------------


def coverage_oracle(store: ProjectStore) -> set[tuple[str, str]]:
    """Rule (a)/(b) subjects by scanning the whole link table for every item."""
    kinds_present = {a.kind.code for a in store.artefacts.values()}
    item_kind = {}
    for art in store.artefacts.values():
        for section in art.walk_sections():
            for item in section.items:
                item_kind[item.id] = item.kind
    expected = set()
    if KindCode.CPD in kinds_present or KindCode.PD in kinds_present:
        for art in store.artefacts.values():
            if art.kind.code is not KindCode.PRQ:
                continue
            for section in art.walk_sections():
                for item in section.items:
                    if item.kind is not ItemKind.REQUIREMENT:
                        continue
                    hit = False
                    for link in store.links:
                        if (
                            link.source == item.id
                            and link.kind is LinkKind.ADDRESSES
                            and item_kind.get(link.target) is ItemKind.DESIGN_ELEMENT
                        ):
                            hit = True
                    if not hit:
                        expected.add(("UncoveredRequirement", item.id))
    p = store.profile
    if KindCode.TPD in kinds_present and not p.merge_designs and p.strict_realisation_coverage:
        for art in store.artefacts.values():
            if art.kind.code is not KindCode.CPD:
                continue
            for section in art.walk_sections():
                for item in section.items:
                    if item.kind is not ItemKind.DESIGN_ELEMENT:
                        continue
                    hit = False
                    for link in store.links:
                        if (
                            link.source == item.id
                            and link.kind is LinkKind.REALISES
                            and item_kind.get(link.target) is ItemKind.REALISATION_ELEMENT
                        ):
                            hit = True
                    if not hit:
                        expected.add(("UnrealisedDesignElement", item.id))
    return expected


def reachability_oracle(nodes: list[str], links: list[TraceLink], changed: set[str], kinds: set[LinkKind]) -> set[str]:
    """Warshall closure of the reversed impact relation; union of rows of changed nodes."""
    universe = sorted(set(nodes) | changed | {l.source for l in links} | {l.target for l in links})
    pos = {n: i for i, n in enumerate(universe)}
    size = len(universe)
    reach = [[False] * size for _ in range(size)]
    for link in links:
        if link.kind in kinds:
            reach[pos[link.target]][pos[link.source]] = True
    for k in range(size):
        for i in range(size):
            if reach[i][k]:
                row_k = reach[k]
                row_i = reach[i]
                for j in range(size):
                    if row_k[j]:
                        row_i[j] = True
    result = set()
    for c in changed:
        result |= {universe[j] for j in range(size) if reach[pos[c]][j]}
    return result


def component_oracle(links: list[TraceLink], assets: set[str], kinds: set[LinkKind]) -> set[frozenset[str]]:
    """Group assets by repeated pairwise merging until nothing changes."""
    edges = [(l.source, l.target) for l in links if l.kind in kinds]
    groups = [{n} for n in {x for e in edges for x in e} | assets]
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            ga = next(g for g in groups if a in g)
            gb = next(g for g in groups if b in g)
            if ga is not gb:
                ga |= gb
                groups.remove(gb)
                changed = True
    return {frozenset(g & assets) for g in groups if g & assets}


# -- random generators ------------------------------------------------------------------

_TEXT = string.ascii_letters + string.digits + " -_äöüß→✓\"'\\"


def _text(rng: random.Random, lo: int = 0, hi: int = 12) -> str:
    return "".join(rng.choice(_TEXT) for _ in range(rng.randint(lo, hi)))


_PLACEABLE = {
    KindCode.PRQ: [("Requirements", ItemKind.REQUIREMENT), ("Goals", ItemKind.GOAL), ("BasicConditions", ItemKind.NOTE)],
    KindCode.CPD: [("Processes", ItemKind.DESIGN_ELEMENT), ("Artefacts", ItemKind.DESIGN_ELEMENT), ("Principles", ItemKind.NOTE)],
    KindCode.TPD: [("Processes", ItemKind.REALISATION_ELEMENT), ("LogicalAndPhysicalModelOrganisation", ItemKind.REALISATION_ELEMENT)],
    KindCode.PD: [("Processes", ItemKind.DESIGN_ELEMENT), ("LogicalAndPhysicalModelOrganisation", ItemKind.REALISATION_ELEMENT)],
    KindCode.PLC: [("Training", ItemKind.NOTE), ("ChangeManagement", ItemKind.ASSET)],
    KindCode.PR: [("Payload", ItemKind.ASSET)],
    KindCode.SUPPORT: [("Body", ItemKind.NOTE), ("Assets", ItemKind.ASSET)],
}


def random_store(rng: random.Random, max_artefacts: int = 20, max_links: int = 50) -> ProjectStore:
    """A structurally valid store with random content, built through the public API."""
    merged = rng.random() < 0.5
    supports = frozenset(rng.sample(["TrainingMaterial", "SPLDeltaReport", "UserEvaluationPlan"], rng.randint(0, 2)))
    profile = TailoringProfile(merged, supports, rng.random() < 0.5, _text(rng))
    store = memory_store(profile, name=_text(rng, 1) or "p")
    store.manifest.vision = _text(rng)
    kinds = [PRQ, PD, PLC, PR] if merged else [PRQ, CPD, TPD, PLC, PR]
    kinds += [ArtefactKind.support(name) for name in ("TrainingMaterial", "SPLDeltaReport", "UserEvaluationPlan")]
    for _ in range(rng.randint(0, max_artefacts)):
        kind = rng.choice(kinds)
        art = repository.create_artefact(store, kind, _text(rng, 1))
        for _ in range(rng.randint(0, 4)):
            key, item_kind = rng.choice(_PLACEABLE[kind.code])
            repository.add_item(store, art.id, key, item_kind, _text(rng))
        if rng.random() < 0.3:
            repository.put_artefact(store, repository.get_artefact(store, art.id))
    elements = list(store.node_types())
    for _ in range(rng.randint(0, max_links) if elements else 0):
        try:
            repository.trace(store, rng.choice(elements), rng.choice(elements), rng.choice(list(LinkKind)))
        except Exception:
            pass
    for n in range(rng.randint(0, 3)):
        store.changes.append(
            ChangeRequest(
                f"CR-{n + 1}",
                rng.choice(list(ChangeOrigin)),
                _text(rng, 1),
                _text(rng),
                rng.choice(list(ChangeStatus)),
                set(rng.sample(elements, min(len(elements), rng.randint(0, 3)))),
            )
        )
    for n in range(rng.randint(0, 3)):
        store.iterations.append(
            Iteration(
                index=n + 1,
                shortened=rng.random() < 0.3,
                state=rng.choice(list(IterationState)),
                current_phase=rng.choice([None, *Phase]),
                produced=set(rng.sample(list(store.artefacts), min(len(store.artefacts), rng.randint(0, 3)))),
                released=rng.choice([None, "REL-1"]),
                inputs=IterationInputs(_text(rng), {c.id for c in store.changes if rng.random() < 0.5}, rng.choice([None, "REL-0"])),
                phases_visited=list(Phase)[: rng.randint(0, 4)],
            )
        )
    for n in range(rng.randint(0, 2)):
        store.releases.append(
            Release(
                f"REL-{n + 1}",
                _text(rng, 1),
                rng.randint(1, 3),
                rng.choice(list(ReleaseStatus)),
                set(rng.sample(list(store.artefacts), min(len(store.artefacts), 2))),
                rng.choice([None, "upstream-1"]),
            )
        )
    return store


def random_coverage_store(rng: random.Random) -> ProjectStore:
    """≤10 items and ≤20 links, including links injected past the kind matrix."""
    merged = rng.random() < 0.4
    store = memory_store(TailoringProfile(merged, strict_realisation_coverage=rng.random() < 0.8))
    layout = [PRQ, PD] if merged else [PRQ, CPD, TPD]
    arts = [repository.create_artefact(store, k, str(k)) for k in layout if rng.random() < 0.85]
    budget = rng.randint(0, 10)
    for _ in range(budget):
        if not arts:
            break
        art = rng.choice(arts)
        key, kind = rng.choice(_PLACEABLE[art.kind.code])
        repository.add_item(store, art.id, key, kind, _text(rng, 1, 4))
    elements = list(store.node_types())
    for n in range(rng.randint(0, 20)):
        if not elements:
            break
        src, dst = rng.choice(elements), rng.choice(elements)
        kind = rng.choice([LinkKind.ADDRESSES, LinkKind.REALISES, LinkKind.ADDRESSES, LinkKind.REALISES, LinkKind.REFINES])
        if rng.random() < 0.5:
            store.links.append(TraceLink(f"X-{n}", src, dst, kind))
        else:
            try:
                repository.trace(store, src, dst, kind)
            except Exception:
                pass
    return store


def random_trace_graph(rng: random.Random, max_nodes: int = 30, max_edges: int = 60) -> tuple[ProjectStore, list[str]]:
    """Store whose link table is an arbitrary directed multigraph over ≤ max_nodes elements."""
    store = memory_store(SPLIT)
    n_nodes = rng.randint(1, max_nodes)
    art = repository.create_artefact(store, ArtefactKind.support("SPLDeltaReport"), "graph")
    nodes = [f"N{i}" for i in range(n_nodes)]
    art = repository.get_artefact(store, art.id)
    art.sections = [Section("Nodes", [ContentItem(n, ItemKind.ASSET, n) for n in nodes])]
    repository.put_artefact(store, art)
    for e in range(rng.randint(0, max_edges)):
        store.links.append(TraceLink(f"L-{e}", rng.choice(nodes), rng.choice(nodes), rng.choice(list(LinkKind))))
    return store, nodes


def random_design_pair(rng: random.Random) -> ProjectStore:
    """Split store with a populated CPD/TPD pair, item links and artefact-level links."""
    store = memory_store(SPLIT)
    prq = repository.create_artefact(store, PRQ, "prq")
    cpd = repository.create_artefact(store, CPD, "cpd")
    tpd = repository.create_artefact(store, TPD, "tpd")
    plc = repository.create_artefact(store, PLC, "plc")
    for art, kind in ((cpd, KindCode.CPD), (tpd, KindCode.TPD)):
        for _ in range(rng.randint(0, 8)):
            section = rng.choice(
                [k for k in ("Goals", "Principles", "Processes", "Artefacts", "OrganisationAndRoles", "Tailoring", "RequirementsTracing")]
                + (["LogicalAndPhysicalModelOrganisation"] if kind is KindCode.TPD else [])
            )
            if section in ("Processes", "Artefacts", "OrganisationAndRoles"):
                item_kind = ItemKind.DESIGN_ELEMENT if kind is KindCode.CPD else ItemKind.REALISATION_ELEMENT
            elif section == "LogicalAndPhysicalModelOrganisation":
                item_kind = ItemKind.REALISATION_ELEMENT
            else:
                item_kind = rng.choice([ItemKind.NOTE, ItemKind.GOAL])
            repository.add_item(store, art.id, section, item_kind, _text(rng, 0, 5))
    for _ in range(rng.randint(0, 3)):
        repository.add_item(store, prq.id, "Requirements", ItemKind.REQUIREMENT, _text(rng, 1, 5))
    elements = list(store.node_types())
    for _ in range(rng.randint(0, 25)):
        try:
            repository.trace(store, rng.choice(elements), rng.choice(elements), rng.choice(list(LinkKind)))
        except Exception:
            pass
    for _ in range(rng.randint(0, 3)):
        a, b = rng.choice([cpd.id, tpd.id, prq.id, plc.id]), rng.choice([cpd.id, tpd.id])
        repository.trace(store, a, b, rng.choice([LinkKind.SHARES, LinkKind.DERIVES_FROM]))
    return store


def project_dir(tmp_path: Path, name: str = "proj") -> Path:
    return tmp_path / name
