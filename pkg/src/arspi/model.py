"""Persisted record types shared across the engine modules."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any


@dataclass(frozen=True)
class TailoringProfile:
    merge_designs: bool = False
    selected_supports: frozenset[str] = frozenset()
    strict_realisation_coverage: bool = True
    notes: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "selected_supports", frozenset(self.selected_supports))

    def to_dict(self) -> dict[str, Any]:
        return {
            "merge_designs": self.merge_designs,
            "selected_supports": sorted(self.selected_supports),
            "strict_realisation_coverage": self.strict_realisation_coverage,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TailoringProfile:
        return cls(
            merge_designs=bool(data["merge_designs"]),
            selected_supports=frozenset(data.get("selected_supports", ())),
            strict_realisation_coverage=bool(data.get("strict_realisation_coverage", True)),
            notes=data.get("notes", ""),
        )


# -- tracing -----------------------------------------------------------------


class LinkKind(str, Enum):
    ADDRESSES = "addresses"
    REFINES = "refines"
    REALISES = "realises"
    SHARES = "shares"
    DERIVES_FROM = "derives_from"


ARTEFACT_NODE = "artefact"

LINK_KIND_MATRIX: frozenset[tuple[str, str, LinkKind]] = frozenset(
    {
        ("requirement", "design_element", LinkKind.ADDRESSES),
        ("design_element", "realisation_element", LinkKind.REALISES),
        ("design_element", "design_element", LinkKind.REFINES),
        (ARTEFACT_NODE, ARTEFACT_NODE, LinkKind.SHARES),
        (ARTEFACT_NODE, ARTEFACT_NODE, LinkKind.DERIVES_FROM),
    }
)

# Artefact-level kinds connect any artefact element: a whole artefact or
# an item inside one (a local design element deriving from an upstream asset).
_ELEMENT_LEVEL = frozenset(kind for src, _, kind in LINK_KIND_MATRIX if src == ARTEFACT_NODE)


def link_permitted(source_type: str, target_type: str, kind: LinkKind) -> bool:
    kind = LinkKind(kind)
    if kind in _ELEMENT_LEVEL:
        return True
    return (source_type, target_type, kind) in LINK_KIND_MATRIX


@dataclass(frozen=True)
class TraceLink:
    id: str
    source: str
    target: str
    kind: LinkKind

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", LinkKind(self.kind))

    @property
    def triple(self) -> tuple[str, str, LinkKind]:
        return (self.source, self.target, self.kind)

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "source": self.source, "target": self.target, "kind": self.kind.value}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TraceLink:
        return cls(data["id"], data["source"], data["target"], LinkKind(data["kind"]))


# -- lifecycle -----------------------------------------------------------------


class Phase(str, Enum):
    ANALYSIS = "Analysis"
    CONCEPTUALISATION = "Conceptualisation"
    REALISATION = "Realisation"
    DEPLOYMENT = "Deployment"

    @property
    def rank(self) -> int:
        return PHASE_ORDER.index(self)

    def successor(self) -> Phase | None:
        pos = self.rank + 1
        return PHASE_ORDER[pos] if pos < len(PHASE_ORDER) else None

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, Phase):
            return NotImplemented
        return self.rank < other.rank

    def __le__(self, other: object) -> bool:
        if not isinstance(other, Phase):
            return NotImplemented
        return self.rank <= other.rank


PHASE_ORDER: tuple[Phase, ...] = tuple(Phase)


class IterationState(str, Enum):
    PLANNED = "planned"
    RUNNING = "running"
    CLOSED = "closed"


@dataclass
class IterationInputs:
    vision: str = ""
    changes: set[str] = field(default_factory=set)
    actual_process: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "vision": self.vision,
            "changes": sorted(self.changes),
            "actual_process": self.actual_process,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> IterationInputs:
        return cls(data.get("vision", ""), set(data.get("changes", ())), data.get("actual_process"))


@dataclass
class Iteration:
    index: int
    shortened: bool = False
    state: IterationState = IterationState.PLANNED
    current_phase: Phase | None = None
    produced: set[str] = field(default_factory=set)
    released: str | None = None
    inputs: IterationInputs = field(default_factory=IterationInputs)
    phases_visited: list[Phase] = field(default_factory=list)

    @property
    def running(self) -> bool:
        return self.state is IterationState.RUNNING

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "shortened": self.shortened,
            "state": self.state.value,
            "current_phase": self.current_phase.value if self.current_phase else None,
            "produced": sorted(self.produced),
            "released": self.released,
            "inputs": self.inputs.to_dict(),
            "phases_visited": [p.value for p in self.phases_visited],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Iteration:
        phase = data.get("current_phase")
        return cls(
            index=int(data["index"]),
            shortened=bool(data.get("shortened", False)),
            state=IterationState(data["state"]),
            current_phase=Phase(phase) if phase else None,
            produced=set(data.get("produced", ())),
            released=data.get("released"),
            inputs=IterationInputs.from_dict(data.get("inputs", {})),
            phases_visited=[Phase(p) for p in data.get("phases_visited", ())],
        )


# -- change management -----------------------------------------------------------


class ChangeOrigin(str, Enum):
    INTERNAL = "internal"
    EXTERNAL_UPDATE_TRIGGER = "external_update_trigger"


class ChangeStatus(str, Enum):
    SUBMITTED = "submitted"
    ACCEPTED = "accepted"
    IN_PROGRESS = "in_progress"
    RESOLVED = "resolved"
    REJECTED = "rejected"


OPEN_CHANGE_STATES = frozenset({ChangeStatus.SUBMITTED, ChangeStatus.ACCEPTED, ChangeStatus.IN_PROGRESS})


@dataclass
class ChangeRequest:
    id: str
    origin: ChangeOrigin
    title: str
    description: str = ""
    status: ChangeStatus = ChangeStatus.SUBMITTED
    linked_assets: set[str] = field(default_factory=set)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "origin": self.origin.value,
            "title": self.title,
            "description": self.description,
            "status": self.status.value,
            "linked_assets": sorted(self.linked_assets),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ChangeRequest:
        return cls(
            id=data["id"],
            origin=ChangeOrigin(data["origin"]),
            title=data["title"],
            description=data.get("description", ""),
            status=ChangeStatus(data["status"]),
            linked_assets=set(data.get("linked_assets", ())),
        )


# -- releases --------------------------------------------------------------------


class ReleaseStatus(str, Enum):
    REVIEW = "review"
    BETA = "beta"
    RELEASE_CANDIDATE = "release_candidate"
    RELEASED = "released"

    @property
    def rank(self) -> int:
        return RELEASE_ORDER.index(self)

    def successor(self) -> ReleaseStatus | None:
        pos = self.rank + 1
        return RELEASE_ORDER[pos] if pos < len(RELEASE_ORDER) else None


RELEASE_ORDER: tuple[ReleaseStatus, ...] = tuple(ReleaseStatus)


@dataclass
class Release:
    id: str
    version_label: str
    iteration_index: int
    status: ReleaseStatus = ReleaseStatus.REVIEW
    payload: set[str] = field(default_factory=set)
    parent_ref: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "version_label": self.version_label,
            "iteration_index": self.iteration_index,
            "status": self.status.value,
            "payload": sorted(self.payload),
            "parent_ref": self.parent_ref,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Release:
        return cls(
            id=data["id"],
            version_label=data["version_label"],
            iteration_index=int(data["iteration_index"]),
            status=ReleaseStatus(data["status"]),
            payload=set(data.get("payload", ())),
            parent_ref=data.get("parent_ref"),
        )


SCHEMA_VERSION = 1


@dataclass
class ProjectManifest:
    project_name: str
    profile: TailoringProfile = field(default_factory=TailoringProfile)
    vision: str = ""
    actual_process_ref: str | None = None
    schema_version: int = SCHEMA_VERSION
