"""Rule engine producing completeness, consistency and release-readiness findings.

Findings never raise; callers decide what an error blocks. Every finding
names a rule from :data:`RULES` and, where one exists, the artefact it
belongs to, which lets release readiness narrow the report to the
artefacts an iteration produced.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable

from arspi.metamodel import (
    Artefact,
    ContentItem,
    ItemKind,
    KindCode,
    find_spec,
    item_allowed,
    structure_problems,
    empty_required_sections,
)
from arspi.model import (
    ARTEFACT_NODE,
    IterationState,
    LinkKind,
    Phase,
    link_permitted,
)
from arspi.repository import ProjectStore, put_artefact


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


RULES: dict[str, tuple[Severity, str]] = {
    "MissingKeyArtefact": (Severity.ERROR, "a key artefact due by the phase reached does not exist"),
    "MissingSection": (Severity.ERROR, "a required section is absent from the artefact"),
    "SectionStructure": (Severity.ERROR, "a section is duplicated, unknown or nested wrongly"),
    "EmptySection": (Severity.ERROR, "a required section holds no content"),
    "MisplacedItem": (Severity.ERROR, "a content item sits in a section that may not hold its kind"),
    "SelectedSupportMissing": (Severity.WARNING, "a support artefact selected by tailoring was not created"),
    "UncoveredRequirement": (Severity.ERROR, "a requirement has no addresses link to a design element"),
    "UnrealisedDesignElement": (Severity.ERROR, "a design element has no realises link to a realisation element"),
    "SharedSectionMismatch": (Severity.ERROR, "a shared section differs between sharing artefacts"),
    "LinkKindViolation": (Severity.ERROR, "a trace link is not allowed for its endpoint kinds"),
    "DanglingEndpoint": (Severity.ERROR, "a trace link endpoint does not exist"),
    "ReleaseAlreadyShipped": (Severity.ERROR, "the iteration already packaged its process release"),
    "ProcessReleaseExists": (Severity.ERROR, "the iteration already produced a PR artefact"),
    "ShortenedIteration": (Severity.WARNING, "shortened iterations have no deployment and cannot release"),
}

COVERAGE_RULES = frozenset({"UncoveredRequirement", "UnrealisedDesignElement"})

TRACING_KEY = "RequirementsTracing"
TRACING_LINK_KINDS = (LinkKind.ADDRESSES, LinkKind.REALISES)


@dataclass(frozen=True)
class Finding:
    severity: Severity
    rule_id: str
    subject: str
    message: str
    artefact: str | None = None

    def sort_key(self) -> tuple[str, str, str, str]:
        return (self.artefact or "", self.subject, self.rule_id, self.message)

    def to_dict(self) -> dict[str, Any]:
        return {
            "severity": self.severity.value,
            "rule_id": self.rule_id,
            "subject": self.subject,
            "message": self.message,
            "artefact": self.artefact,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Finding:
        return cls(Severity(data["severity"]), data["rule_id"], data["subject"], data["message"], data.get("artefact"))

    def __str__(self) -> str:
        return f"{self.severity.value}: [{self.rule_id}] {self.subject}: {self.message}"


def finding(rule_id: str, subject: str, message: str, artefact: str | None = None) -> Finding:
    severity, _ = RULES[rule_id]
    return Finding(severity, rule_id, subject, message, artefact)


def _sorted(findings: Iterable[Finding]) -> list[Finding]:
    return sorted(set(findings), key=Finding.sort_key)


def errors(findings: Iterable[Finding]) -> list[Finding]:
    return [f for f in findings if f.severity is Severity.ERROR]


def exit_status(findings: Iterable[Finding]) -> int:
    """0 clean, 1 warnings only, 2 errors."""
    severities = {f.severity for f in findings}
    if Severity.ERROR in severities:
        return 2
    return 1 if severities else 0


# -- completeness -------------------------------------------------------------------

# Phase index by which each key artefact must exist once that phase is complete.
_DUE_AFTER: dict[KindCode, int] = {
    KindCode.PRQ: Phase.ANALYSIS.rank,
    KindCode.CPD: Phase.CONCEPTUALISATION.rank,
    KindCode.TPD: Phase.REALISATION.rank,
    KindCode.PR: Phase.DEPLOYMENT.rank,
}


def phases_completed(store: ProjectStore) -> int:
    """Number of phases finished by the furthest iteration (0..4)."""
    done = 0
    for it in store.iterations:
        if it.state is IterationState.RUNNING and it.current_phase is not None:
            done = max(done, it.current_phase.rank)
        elif it.state is IterationState.CLOSED:
            done = max(done, Phase.REALISATION.rank + 1 if it.shortened else len(Phase))
    return done


def deployment_reached(store: ProjectStore) -> bool:
    for it in store.iterations:
        if Phase.DEPLOYMENT in it.phases_visited or it.current_phase is Phase.DEPLOYMENT:
            return True
    return False


def mandatory_kinds(store: ProjectStore) -> list[KindCode]:
    """Key artefact kinds that must exist given the furthest phase reached."""
    done = phases_completed(store)
    merged = store.profile.merge_designs
    kinds: list[KindCode] = []
    for code, due in _DUE_AFTER.items():
        if done > due:
            if merged and code in (KindCode.CPD, KindCode.TPD):
                code = KindCode.PD
            if code not in kinds:
                kinds.append(code)
    if deployment_reached(store):
        kinds.append(KindCode.PLC)
    return kinds


def check_artefact_structure(artefact: Artefact) -> list[Finding]:
    found = []
    for problem, key in structure_problems(artefact):
        rule = "MissingSection" if problem == "missing" else "SectionStructure"
        found.append(finding(rule, f"{artefact.id}/{key}", f"{problem} section {key}", artefact.id))
    for key in empty_required_sections(artefact):
        found.append(finding("EmptySection", f"{artefact.id}/{key}", f"required section {key} is empty", artefact.id))
    for section, item in artefact.items():
        if not item_allowed(artefact.kind, section.spec_key, item.kind):
            found.append(
                finding(
                    "MisplacedItem",
                    item.id,
                    f"{item.kind.value} item not allowed in {artefact.kind}.{section.spec_key}",
                    artefact.id,
                )
            )
    return found


def check_completeness(store: ProjectStore) -> list[Finding]:
    found: list[Finding] = []
    present = {art.kind.code for art in store.artefacts.values()}
    for code in mandatory_kinds(store):
        if code not in present:
            found.append(finding("MissingKeyArtefact", f"kind:{code.value}", f"no {code.value} artefact exists"))
    for art in store.artefacts.values():
        found.extend(check_artefact_structure(art))
    if any(it.state is not IterationState.PLANNED for it in store.iterations):
        supports = {art.kind.support_name for art in store.artefacts.values() if art.kind.is_support}
        for name in sorted(store.profile.selected_supports - supports):
            found.append(finding("SelectedSupportMissing", f"support:{name}", f"selected support artefact {name} not created"))
    return _sorted(found)


# -- consistency ----------------------------------------------------------------------


def tracing_projection(store: ProjectStore) -> list[str]:
    """Document view of the link table kept in RequirementsTracing sections."""
    types = store.node_types()
    lines = {
        f"{link.source} {link.kind.value} {link.target}"
        for link in store.links
        if link.kind in TRACING_LINK_KINDS
        and types.get(link.source, ARTEFACT_NODE) != ARTEFACT_NODE
        and types.get(link.target, ARTEFACT_NODE) != ARTEFACT_NODE
    }
    return sorted(lines)


def _items_of_kind(store: ProjectStore, codes: set[KindCode], item_kind: ItemKind) -> list[tuple[str, ContentItem]]:
    return [
        (art.id, item)
        for art in store.artefacts.values()
        if art.kind.code in codes
        for _, item in art.items()
        if item.kind is item_kind
    ]


def coverage_findings(store: ProjectStore) -> list[Finding]:
    """Rules (a) and (b): requirement and design-element trace coverage."""
    codes = {art.kind.code for art in store.artefacts.values()}
    types = store.node_types()
    outgoing: dict[tuple[str, LinkKind], set[str]] = {}
    for link in store.links:
        outgoing.setdefault((link.source, link.kind), set()).add(link.target)

    found: list[Finding] = []
    if codes & {KindCode.CPD, KindCode.PD}:
        for art_id, item in _items_of_kind(store, {KindCode.PRQ}, ItemKind.REQUIREMENT):
            targets = outgoing.get((item.id, LinkKind.ADDRESSES), set())
            if not any(types.get(t) == ItemKind.DESIGN_ELEMENT.value for t in targets):
                found.append(finding("UncoveredRequirement", item.id, "requirement is not addressed by any design element", art_id))
    profile = store.profile
    if KindCode.TPD in codes and not profile.merge_designs and profile.strict_realisation_coverage:
        for art_id, item in _items_of_kind(store, {KindCode.CPD}, ItemKind.DESIGN_ELEMENT):
            targets = outgoing.get((item.id, LinkKind.REALISES), set())
            if not any(types.get(t) == ItemKind.REALISATION_ELEMENT.value for t in targets):
                found.append(finding("UnrealisedDesignElement", item.id, "design element is not realised by any realisation element", art_id))
    return found


def shared_section_findings(store: ProjectStore) -> list[Finding]:
    found: list[Finding] = []
    holders: dict[str, list[Artefact]] = {}
    for art in store.artefacts.values():
        for section in art.walk_sections():
            spec = find_spec(art.kind, section.spec_key)
            if spec is not None and spec.shared_with:
                holders.setdefault(section.spec_key, []).append(art)

    projection = tracing_projection(store)
    for key, arts in sorted(holders.items()):
        if key == TRACING_KEY:
            reference, source = projection, "the trace link table"
            compared = arts
        else:
            # PRQ is where shared content originates
            first = next((a for a in arts if a.kind.code is KindCode.PRQ), arts[0])
            reference, source = first.section(key).texts(), first.id
            compared = [a for a in arts if a is not first]
        for art in compared:
            if art.section(key).texts() != reference:
                found.append(
                    finding("SharedSectionMismatch", f"{art.id}/{key}", f"content differs from {source}", art.id)
                )
    return found


def link_findings(store: ProjectStore) -> list[Finding]:
    types = store.node_types()
    owners = store.element_owner()
    found: list[Finding] = []
    for link in store.links:
        owner = owners.get(link.source) or owners.get(link.target)
        missing = [end for end in (link.source, link.target) if end not in types]
        if missing:
            found.append(finding("DanglingEndpoint", link.id, f"endpoint {', '.join(missing)} does not exist", owner))
        elif not link_permitted(types[link.source], types[link.target], link.kind):
            found.append(
                finding(
                    "LinkKindViolation",
                    link.id,
                    f"{link.kind.value} not allowed from {types[link.source]} to {types[link.target]}",
                    owner,
                )
            )
    return found


def check_consistency(store: ProjectStore) -> list[Finding]:
    return _sorted(coverage_findings(store) + shared_section_findings(store) + link_findings(store))


def validate(store: ProjectStore) -> list[Finding]:
    return _sorted(check_completeness(store) + check_consistency(store))


# -- release readiness ----------------------------------------------------------------


def check_release_readiness(store: ProjectStore, iteration: int) -> list[Finding]:
    it = store.iteration(iteration)
    found = [f for f in errors(validate(store)) if f.artefact is not None and f.artefact in it.produced]
    subject = f"iteration:{it.index}"
    if it.released or any(rel.iteration_index == it.index for rel in store.releases):
        found.append(finding("ReleaseAlreadyShipped", subject, "one process release per iteration"))
    else:
        prs = sorted(a for a in it.produced if a in store.artefacts and store.artefacts[a].kind.code is KindCode.PR)
        if prs and not it.shortened:
            found.append(finding("ProcessReleaseExists", subject, f"PR {', '.join(prs)} already produced"))
    if it.shortened:
        found.append(finding("ShortenedIteration", subject, "iteration has no deployment phase"))
    return _sorted(found)


# -- generated shared content ----------------------------------------------------------


def sync_shared_sections(store: ProjectStore) -> list[str]:
    """Regenerate shared sections from their sources; return ids of updated artefacts.

    RequirementsTracing sections receive the projection of the link table;
    other shared sections receive the content of the PRQ's section.
    """
    updated: list[str] = []
    prq = next((a for a in store.artefacts.values() if a.kind.code is KindCode.PRQ), None)
    projection = tracing_projection(store)
    for art_id in list(store.artefacts):
        art = store.artefacts[art_id]
        changes: dict[str, list[tuple[ItemKind, str]]] = {}
        for section in art.walk_sections():
            spec = find_spec(art.kind, section.spec_key)
            if spec is None or not spec.shared_with:
                continue
            if section.spec_key == TRACING_KEY:
                wanted = [(ItemKind.NOTE, line) for line in projection]
            elif prq is not None and art is not prq and (src := prq.section(section.spec_key)) is not None:
                wanted = [(item.kind, item.text) for item in src.items]
            else:
                continue
            if [(i.kind, i.text) for i in section.items] != wanted:
                changes[section.spec_key] = wanted
        if not changes:
            continue
        copy_ = Artefact.from_dict(art.to_dict())
        first = int(store.allocate_id("I").rsplit("-", 1)[1])
        for key, wanted in changes.items():
            section = copy_.section(key)
            section.items = [ContentItem(f"I-{first + n}", kind, text) for n, (kind, text) in enumerate(wanted)]
            first += len(wanted)
        put_artefact(store, copy_)
        updated.append(art_id)
    return updated
