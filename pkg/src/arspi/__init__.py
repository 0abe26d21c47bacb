"""Artefact-based software process improvement engine."""

from arspi.errors import ArspiError
from arspi.metamodel import (
    CPD,
    PD,
    PLC,
    PR,
    PRQ,
    TPD,
    Artefact,
    ArtefactKind,
    ContentItem,
    ItemKind,
    KindCode,
    Section,
    SectionSpec,
    SupportArtefactDescriptor,
    SupportRegistry,
    catalog_key_artefacts,
    new_artefact,
    required_sections,
)
from arspi.model import (
    ChangeRequest,
    Iteration,
    IterationInputs,
    LinkKind,
    Phase,
    Release,
    ReleaseStatus,
    TailoringProfile,
    TraceLink,
)
from arspi.repository import ProjectStore, init_project, load, save

__all__ = [
    "ArspiError",
    "Artefact",
    "ArtefactKind",
    "CPD",
    "ChangeRequest",
    "ContentItem",
    "ItemKind",
    "Iteration",
    "IterationInputs",
    "KindCode",
    "LinkKind",
    "PD",
    "PLC",
    "PR",
    "PRQ",
    "Phase",
    "ProjectStore",
    "Release",
    "ReleaseStatus",
    "Section",
    "SectionSpec",
    "SupportArtefactDescriptor",
    "SupportRegistry",
    "TPD",
    "TailoringProfile",
    "TraceLink",
    "catalog_key_artefacts",
    "init_project",
    "load",
    "new_artefact",
    "required_sections",
    "save",
]
