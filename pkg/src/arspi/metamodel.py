"""Typed artefact catalog: key artefacts, section structures, content items.

Section keys are ASCII identifiers without dots, derived from the section
titles, so that a dotted path (``PlannedAdaptations.Processes``) is always
unambiguous. Keys are unique inside one kind's spec tree.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Iterator

from arspi.errors import (
    BuiltinOverwrite,
    DuplicateName,
    ItemPlacementError,
    KindNotPermitted,
    SectionError,
    UnknownSupportArtefact,
)

if TYPE_CHECKING:
    from arspi.model import TailoringProfile


class KindCode(str, Enum):
    PRQ = "PRQ"
    CPD = "CPD"
    TPD = "TPD"
    PD = "PD"
    PLC = "PLC"
    PR = "PR"
    SUPPORT = "SUPPORT"


@dataclass(frozen=True, order=True)
class ArtefactKind:
    code: KindCode
    support_name: str | None = None

    def __post_init__(self) -> None:
        code = KindCode(self.code)
        object.__setattr__(self, "code", code)
        if code is KindCode.SUPPORT and not self.support_name:
            raise ValueError("SUPPORT kinds need a support_name")
        if code is not KindCode.SUPPORT and self.support_name is not None:
            raise ValueError(f"{code.value} does not take a support_name")

    @classmethod
    def support(cls, name: str) -> ArtefactKind:
        return cls(KindCode.SUPPORT, name)

    @classmethod
    def parse(cls, text: str) -> ArtefactKind:
        """Parse ``PRQ`` or ``SUPPORT:TrainingMaterial`` style labels."""
        head, _, tail = text.partition(":")
        try:
            code = KindCode(head.strip().upper())
        except ValueError:
            raise ValueError(f"unknown artefact kind {text!r}") from None
        if code is KindCode.SUPPORT:
            return cls(code, tail.strip() or None)
        if tail:
            raise ValueError(f"unknown artefact kind {text!r}")
        return cls(code)

    @property
    def is_support(self) -> bool:
        return self.code is KindCode.SUPPORT

    @property
    def is_dynamic(self) -> bool:
        """PR and support artefacts have no fixed required structure."""
        return self.code in (KindCode.PR, KindCode.SUPPORT)

    def __str__(self) -> str:
        if self.support_name:
            return f"{self.code.value}:{self.support_name}"
        return self.code.value


PRQ = ArtefactKind(KindCode.PRQ)
CPD = ArtefactKind(KindCode.CPD)
TPD = ArtefactKind(KindCode.TPD)
PD = ArtefactKind(KindCode.PD)
PLC = ArtefactKind(KindCode.PLC)
PR = ArtefactKind(KindCode.PR)

KEY_KINDS: tuple[ArtefactKind, ...] = (PRQ, CPD, TPD, PLC, PR)


@dataclass(frozen=True)
class SectionSpec:
    key: str
    title: str
    required: bool = True
    shared_with: frozenset[KindCode] = frozenset()
    children: tuple[SectionSpec, ...] = ()

    def walk(self) -> Iterator[SectionSpec]:
        yield self
        for child in self.children:
            yield from child.walk()

    def to_dict(self) -> dict[str, Any]:
        return {
            "key": self.key,
            "title": self.title,
            "required": self.required,
            "shared_with": sorted(code.value for code in self.shared_with),
            "children": [child.to_dict() for child in self.children],
        }


SpecTree = tuple[SectionSpec, ...]


def walk_tree(tree: SpecTree) -> Iterator[SectionSpec]:
    for spec in tree:
        yield from spec.walk()


def tree_keys(tree: SpecTree) -> list[str]:
    return [spec.key for spec in walk_tree(tree)]


# -- catalog data --------------------------------------------------------------

# Groups of kinds that hold the same section. PD stands in for CPD and TPD in
# merged projects, so it forms its own groups instead of joining theirs.
_SHARE_GROUPS: dict[str, tuple[frozenset[KindCode], ...]] = {
    "Goals": (
        frozenset({KindCode.PRQ, KindCode.CPD}),
        frozenset({KindCode.PRQ, KindCode.PD}),
    ),
    "RequirementsTracing": (
        frozenset({KindCode.PRQ, KindCode.CPD, KindCode.TPD}),
        frozenset({KindCode.PRQ, KindCode.PD}),
    ),
}

# (key, title, children) outlines; sharing is filled in from _SHARE_GROUPS.
_Outline = tuple[tuple[str, str, tuple], ...]

_PRQ_OUTLINE: _Outline = (
    ("Goals", "Goals", ()),
    ("StakeholdersAndRoles", "Stakeholders and Roles", ()),
    ("Requirements", "Requirements", ()),
    ("OverallProcessDraft", "Overall Process Draft", ()),
    ("TechnicalInfrastructure", "Technical Infrastructure", ()),
    ("BasicConditions", "Basic Conditions", ()),
)

_CPD_OUTLINE: _Outline = (
    ("Goals", "Goals", ()),
    ("Principles", "Principles", ()),
    (
        "PlannedAdaptations",
        "Planned Adaptations",
        (
            ("OrganisationAndRoles", "Organisation and Roles", ()),
            ("Artefacts", "Artefacts", ()),
            ("Processes", "Processes", ()),
        ),
    ),
    (
        "AdditionalRequirements",
        "Additional Requirements",
        (
            ("Tailoring", "Tailoring", ()),
            ("ProcessDocumentation", "Process Documentation", ()),
            ("SupportingMaterial", "Supporting Material", ()),
        ),
    ),
    ("RequirementsTracing", "Requirements Tracing", ()),
)

_TPD_OUTLINE: _Outline = _CPD_OUTLINE + (
    ("LogicalAndPhysicalModelOrganisation", "Logical and Physical Model Organisation", ()),
)

_PLC_OUTLINE: _Outline = (
    ("Training", "Training", ()),
    ("DeploymentAndFurtherDevelopment", "Deployment and Further Development", ()),
    ("MeasurementAndEvaluation", "Measurement and Evaluation", ()),
    ("ChangeManagement", "Change Management", ()),
)


def _shared_with(code: KindCode, key: str) -> frozenset[KindCode]:
    partners: set[KindCode] = set()
    for group in _SHARE_GROUPS.get(key, ()):
        if code in group:
            partners |= group - {code}
    return frozenset(partners)


def _build(code: KindCode, outline: _Outline) -> SpecTree:
    return tuple(
        SectionSpec(
            key=key,
            title=title,
            shared_with=_shared_with(code, key),
            children=_build(code, children),
        )
        for key, title, children in outline
    )


def _union_outline(first: _Outline, second: _Outline) -> _Outline:
    merged: list[tuple[str, str, tuple]] = []
    index = {key: pos for pos, (key, _, _) in enumerate(first)}
    merged.extend(first)
    for key, title, children in second:
        if key in index:
            k, t, c = merged[index[key]]
            merged[index[key]] = (k, t, _union_outline(c, children))
        else:
            merged.append((key, title, children))
    return tuple(merged)


_TREES: dict[KindCode, SpecTree] = {
    KindCode.PRQ: _build(KindCode.PRQ, _PRQ_OUTLINE),
    KindCode.CPD: _build(KindCode.CPD, _CPD_OUTLINE),
    KindCode.TPD: _build(KindCode.TPD, _TPD_OUTLINE),
    KindCode.PD: _build(KindCode.PD, _union_outline(_CPD_OUTLINE, _TPD_OUTLINE)),
    KindCode.PLC: _build(KindCode.PLC, _PLC_OUTLINE),
    KindCode.PR: (),
}

KIND_TITLES: dict[KindCode, str] = {
    KindCode.PRQ: "Process Requirements",
    KindCode.CPD: "Conceptual Process Design",
    KindCode.TPD: "Technical Process Design",
    KindCode.PD: "Process Design",
    KindCode.PLC: "Process Life Cycle Support",
    KindCode.PR: "Process Release",
    KindCode.SUPPORT: "Support Artefact",
}


def spec_tree(kind: ArtefactKind) -> SpecTree:
    """Catalog tree for ``kind`` with no tailoring check (support kinds are empty)."""
    return _TREES.get(kind.code, ())


def catalog_key_artefacts() -> list[tuple[ArtefactKind, SpecTree]]:
    """The five key artefact kinds plus the unified PD, with their spec trees."""
    return [(kind, spec_tree(kind)) for kind in (PRQ, CPD, TPD, PD, PLC, PR)]


def kind_permitted(kind: ArtefactKind, profile: TailoringProfile | None) -> bool:
    merged = bool(profile is not None and profile.merge_designs)
    if kind.code is KindCode.PD:
        return merged
    if kind.code in (KindCode.CPD, KindCode.TPD):
        return not merged
    return True


def ensure_permitted(kind: ArtefactKind, profile: TailoringProfile | None) -> None:
    if not kind_permitted(kind, profile):
        if kind.code is KindCode.PD:
            raise KindNotPermitted("PD requires a profile with merge_designs enabled")
        raise KindNotPermitted(f"{kind} is not permitted when designs are merged into PD")


def required_sections(kind: ArtefactKind, profile: TailoringProfile | None = None) -> SpecTree:
    ensure_permitted(kind, profile)
    return spec_tree(kind)


def find_spec(kind: ArtefactKind, key: str) -> SectionSpec | None:
    for spec in walk_tree(spec_tree(kind)):
        if spec.key == key:
            return spec
    return None


def required_leaf_keys(kind: ArtefactKind) -> list[str]:
    """Required sections that must carry content themselves (no child specs)."""
    return [s.key for s in walk_tree(spec_tree(kind)) if s.required and not s.children]


def catalog_asymmetries() -> list[tuple[KindCode, str, KindCode]]:
    """Return (kind, key, partner) triples where sharing is not mirrored.

    A partner that has no section under the same key is not checked; PRQ
    does not carry RequirementsTracing even though CPD and TPD share it.
    """
    problems = []
    for kind, tree in catalog_key_artefacts():
        for spec in walk_tree(tree):
            for partner in sorted(spec.shared_with):
                other = find_spec(ArtefactKind(partner), spec.key)
                if other is not None and kind.code not in other.shared_with:
                    problems.append((kind.code, spec.key, partner))
    return problems


# -- support artefacts --------------------------------------------------------


@dataclass(frozen=True)
class SupportArtefactDescriptor:
    name: str
    description: str = ""
    builtin: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "description": self.description, "builtin": self.builtin}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SupportArtefactDescriptor:
        return cls(data["name"], data.get("description", ""), bool(data.get("builtin", False)))


USER_EVALUATION_PLAN = "UserEvaluationPlan"
TRAINING_MATERIAL = "TrainingMaterial"
SPL_DELTA_REPORT = "SPLDeltaReport"

BUILTIN_SUPPORTS: tuple[SupportArtefactDescriptor, ...] = (
    SupportArtefactDescriptor(
        USER_EVALUATION_PLAN,
        "Qualitative evaluation of how a process is actually used.",
        builtin=True,
    ),
    SupportArtefactDescriptor(
        TRAINING_MATERIAL,
        "Material to train process consumers, per stakeholder group and release.",
        builtin=True,
    ),
    SupportArtefactDescriptor(
        SPL_DELTA_REPORT,
        "Deviations of a process variant from its process-line base process.",
        builtin=True,
    ),
)


class SupportRegistry:
    """Name-keyed registry of support artefact descriptors, seeded with built-ins."""

    def __init__(self, extra: list[SupportArtefactDescriptor] | None = None):
        self._entries: dict[str, SupportArtefactDescriptor] = {d.name: d for d in BUILTIN_SUPPORTS}
        for descriptor in extra or ():
            self.register(descriptor)

    def register(self, descriptor: SupportArtefactDescriptor) -> SupportRegistry:
        existing = self._entries.get(descriptor.name)
        if existing is not None:
            if existing.builtin:
                raise BuiltinOverwrite(f"{descriptor.name} is a built-in support artefact")
            raise DuplicateName(f"support artefact {descriptor.name!r} already registered")
        if not descriptor.name or not descriptor.name.isidentifier():
            raise ValueError(f"invalid support artefact name {descriptor.name!r}")
        self._entries[descriptor.name] = SupportArtefactDescriptor(
            descriptor.name, descriptor.description, builtin=False
        )
        return self

    def get(self, name: str) -> SupportArtefactDescriptor:
        try:
            return self._entries[name]
        except KeyError:
            raise UnknownSupportArtefact(f"no support artefact named {name!r}") from None

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[SupportArtefactDescriptor]:
        return iter(self._entries.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SupportRegistry):
            return NotImplemented
        return self._entries == other._entries

    def names(self) -> list[str]:
        return list(self._entries)

    def custom(self) -> list[SupportArtefactDescriptor]:
        return [d for d in self._entries.values() if not d.builtin]

    def builtin_count(self) -> int:
        return sum(1 for d in self._entries.values() if d.builtin)


def register_support_artefact(
    registry: SupportRegistry, descriptor: SupportArtefactDescriptor
) -> SupportRegistry:
    return registry.register(descriptor)


# -- artefact content ----------------------------------------------------------


class ItemKind(str, Enum):
    GOAL = "goal"
    REQUIREMENT = "requirement"
    DESIGN_ELEMENT = "design_element"
    REALISATION_ELEMENT = "realisation_element"
    ASSET = "asset"
    NOTE = "note"


_DESIGN_KEYS = frozenset({"PlannedAdaptations", "OrganisationAndRoles", "Artefacts", "Processes"})
_REALISATION_KEYS = _DESIGN_KEYS | {"LogicalAndPhysicalModelOrganisation"}

_PLACEMENT: dict[ItemKind, dict[KindCode, frozenset[str]]] = {
    ItemKind.REQUIREMENT: {KindCode.PRQ: frozenset({"Requirements"})},
    ItemKind.DESIGN_ELEMENT: {KindCode.CPD: _DESIGN_KEYS, KindCode.PD: _DESIGN_KEYS},
    ItemKind.REALISATION_ELEMENT: {KindCode.TPD: _REALISATION_KEYS, KindCode.PD: _REALISATION_KEYS},
}


def item_allowed(kind: ArtefactKind, section_key: str, item_kind: ItemKind) -> bool:
    rule = _PLACEMENT.get(ItemKind(item_kind))
    if rule is None:
        return True
    return section_key in rule.get(kind.code, frozenset())


@dataclass
class ContentItem:
    id: str
    kind: ItemKind
    text: str

    def __post_init__(self) -> None:
        self.kind = ItemKind(self.kind)

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "kind": self.kind.value, "text": self.text}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ContentItem:
        return cls(data["id"], ItemKind(data["kind"]), data["text"])


@dataclass
class Section:
    spec_key: str
    items: list[ContentItem] = field(default_factory=list)
    children: list[Section] = field(default_factory=list)

    def walk(self) -> Iterator[Section]:
        yield self
        for child in self.children:
            yield from child.walk()

    def texts(self) -> list[str]:
        return [item.text for item in self.items]

    def to_dict(self) -> dict[str, Any]:
        return {
            "spec_key": self.spec_key,
            "items": [item.to_dict() for item in self.items],
            "children": [child.to_dict() for child in self.children],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Section:
        return cls(
            data["spec_key"],
            [ContentItem.from_dict(item) for item in data.get("items", [])],
            [cls.from_dict(child) for child in data.get("children", [])],
        )


@dataclass
class Artefact:
    id: str
    kind: ArtefactKind
    name: str
    version: int = 1
    sections: list[Section] = field(default_factory=list)

    def walk_sections(self) -> Iterator[Section]:
        for section in self.sections:
            yield from section.walk()

    def section(self, key: str) -> Section | None:
        """Find a section by bare key or dotted path."""
        parts = key.split(".")
        candidates = self.sections
        found: Section | None = None
        if len(parts) == 1:
            return next((s for s in self.walk_sections() if s.spec_key == key), None)
        for part in parts:
            found = next((s for s in candidates if s.spec_key == part), None)
            if found is None:
                return None
            candidates = found.children
        return found

    def items(self) -> Iterator[tuple[Section, ContentItem]]:
        for section in self.walk_sections():
            for item in section.items:
                yield section, item

    def item_ids(self) -> list[str]:
        return [item.id for _, item in self.items()]

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": str(self.kind),
            "name": self.name,
            "version": self.version,
            "sections": [section.to_dict() for section in self.sections],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Artefact:
        return cls(
            id=data["id"],
            kind=ArtefactKind.parse(data["kind"]),
            name=data["name"],
            version=int(data["version"]),
            sections=[Section.from_dict(s) for s in data.get("sections", [])],
        )


def _empty_sections(tree: SpecTree) -> list[Section]:
    return [Section(spec.key, [], _empty_sections(spec.children)) for spec in tree if spec.required]


def new_artefact(
    kind: ArtefactKind,
    name: str,
    profile: TailoringProfile | None = None,
    *,
    registry: SupportRegistry | None = None,
    artefact_id: str | None = None,
) -> Artefact:
    """Create version 1 of an artefact with an empty section per required spec."""
    tree = required_sections(kind, profile)
    if kind.is_support:
        (registry or SupportRegistry()).get(kind.support_name or "")
    if artefact_id is None:
        artefact_id = f"{kind.code.value}-{uuid.uuid4().hex[:8]}"
    return Artefact(artefact_id, kind, name, 1, _empty_sections(tree))


def structure_problems(artefact: Artefact) -> list[tuple[str, str]]:
    """Return (problem, key) pairs where the section tree breaks its spec.

    Problems are ``missing``, ``duplicate``, ``unknown`` and ``misplaced``
    (a section nested under the wrong parent). Dynamic kinds accept any
    section layout.
    """
    if artefact.kind.is_dynamic:
        return []
    problems: list[tuple[str, str]] = []

    def check(tree: SpecTree, sections: list[Section]) -> None:
        by_key: dict[str, list[Section]] = {}
        for section in sections:
            by_key.setdefault(section.spec_key, []).append(section)
        expected = {spec.key for spec in tree}
        for key, found in by_key.items():
            if key not in expected:
                where = "misplaced" if find_spec(artefact.kind, key) else "unknown"
                problems.append((where, key))
            elif len(found) > 1:
                problems.append(("duplicate", key))
        for spec in tree:
            found = by_key.get(spec.key)
            if not found:
                if spec.required:
                    problems.append(("missing", spec.key))
                continue
            check(spec.children, found[0].children)

    check(spec_tree(artefact.kind), artefact.sections)
    return problems


def ensure_structure(artefact: Artefact) -> None:
    problems = structure_problems(artefact)
    if problems:
        detail = ", ".join(f"{what} section {key}" for what, key in problems)
        raise SectionError(f"{artefact.id}: {detail}")
    for section, item in artefact.items():
        if not item_allowed(artefact.kind, section.spec_key, item.kind):
            raise ItemPlacementError(
                f"{item.kind.value} item {item.id} not allowed in {artefact.kind}.{section.spec_key}"
            )


def empty_required_sections(artefact: Artefact) -> list[str]:
    """Required leaf sections that exist but hold no items."""
    if artefact.kind.is_dynamic:
        return []
    empty = []
    for key in required_leaf_keys(artefact.kind):
        section = artefact.section(key)
        if section is not None and not section.items:
            empty.append(key)
    return empty


def completeness_ratio(artefact: Artefact) -> float:
    leaves = required_leaf_keys(artefact.kind)
    if not leaves:
        return 1.0
    filled = sum(1 for key in leaves if (s := artefact.section(key)) is not None and s.items)
    return filled / len(leaves)


def dump_catalog() -> list[dict[str, Any]]:
    return [
        {
            "kind": str(kind),
            "title": KIND_TITLES[kind.code],
            "sections": [spec.to_dict() for spec in tree],
        }
        for kind, tree in catalog_key_artefacts()
    ]
