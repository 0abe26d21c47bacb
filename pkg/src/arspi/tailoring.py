"""Project set-up: questionnaire answers to a tailoring profile.

Five questions drive a fixed rule table:

===================== ==================================================
answer                effect
===================== ==================================================
project_scale         small and medium merge CPD and TPD into one PD;
                      large keeps the two-staged design. ``merge``
                      overrides the scale rule.
training_needed       selects TrainingMaterial
process_line_based    selects SPLDeltaReport
preexisting_process   recorded in the notes; an existing process is the
                      Actual Process reference of the first iteration
iteration_count       with more than one iteration and no pre-existing
                      process, iteration 1 is shortened (prototype and
                      demonstrator, no deployment)
===================== ==================================================
"""

from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass
from enum import Enum

from arspi.errors import IncompatibleRetailoring, KindMismatch, ProfileInvalid
from arspi.metamodel import (
    PD,
    SPL_DELTA_REPORT,
    TRAINING_MATERIAL,
    Artefact,
    ArtefactKind,
    KindCode,
    Section,
    SpecTree,
    required_sections,
)
from arspi.model import TailoringProfile, TraceLink
from arspi.repository import ProjectStore, create_artefact, get_artefact, put_artefact


class ProjectScale(str, Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


@dataclass(frozen=True)
class QuestionnaireAnswers:
    project_scale: ProjectScale
    preexisting_process: bool
    training_needed: bool
    process_line_based: bool
    iteration_count_planned: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "project_scale", ProjectScale(self.project_scale))
        if self.iteration_count_planned < 1:
            raise ProfileInvalid("iteration_count_planned must be at least 1")


MERGED_SCALES = frozenset({ProjectScale.SMALL, ProjectScale.MEDIUM})


def derive_profile(answers: QuestionnaireAnswers, *, merge: bool | None = None) -> TailoringProfile:
    merged = answers.project_scale in MERGED_SCALES if merge is None else merge
    supports = set()
    if answers.training_needed:
        supports.add(TRAINING_MATERIAL)
    if answers.process_line_based:
        supports.add(SPL_DELTA_REPORT)
    notes = [
        f"scale={answers.project_scale.value}",
        f"preexisting_process={'yes' if answers.preexisting_process else 'no'}",
        f"iterations={answers.iteration_count_planned}",
    ]
    if merge is not None:
        notes.append("merge set explicitly")
    return TailoringProfile(
        merge_designs=merged,
        selected_supports=frozenset(supports),
        strict_realisation_coverage=not merged,
        notes="; ".join(notes),
    )


def iteration_plan(answers: QuestionnaireAnswers) -> list[bool]:
    """Shortened flags for the planned iterations."""
    count = answers.iteration_count_planned
    prototype_first = count > 1 and not answers.preexisting_process
    return [prototype_first and n == 0 for n in range(count)]


def all_answers(max_iterations: int = 3) -> list[QuestionnaireAnswers]:
    """Every answer combination with up to ``max_iterations`` planned iterations."""
    return [
        QuestionnaireAnswers(scale, pre, training, line, count)
        for scale, pre, training, line, count in itertools.product(
            ProjectScale, (False, True), (False, True), (False, True), range(1, max_iterations + 1)
        )
    ]


def apply_profile(store: ProjectStore, profile: TailoringProfile) -> list[Artefact]:
    """Install ``profile`` and create empty skeletons for selected supports.

    Returns the support artefacts created.
    """
    unknown = sorted(n for n in profile.selected_supports if n not in store.registry)
    if unknown:
        raise ProfileInvalid(f"unknown support artefacts selected: {', '.join(unknown)}")
    if profile.merge_designs != store.profile.merge_designs:
        blocking = {KindCode.CPD, KindCode.TPD} if profile.merge_designs else {KindCode.PD}
        held = sorted(a.id for a in store.artefacts.values() if a.kind.code in blocking)
        if held:
            raise IncompatibleRetailoring(
                f"cannot {'merge' if profile.merge_designs else 'split'} designs while {', '.join(held)} exist"
            )
    store.manifest.profile = profile
    existing = {a.kind.support_name for a in store.artefacts.values() if a.kind.is_support}
    return [
        create_artefact(store, ArtefactKind.support(name), name)
        for name in sorted(profile.selected_supports - existing)
    ]


# -- CPD + TPD -> PD ----------------------------------------------------------------


def _merge_sections(tree: SpecTree, cpd: list[Section], tpd: list[Section]) -> list[Section]:
    by_key_cpd = {s.spec_key: s for s in cpd}
    by_key_tpd = {s.spec_key: s for s in tpd}
    merged = []
    for spec in tree:
        left = by_key_cpd.get(spec.key)
        right = by_key_tpd.get(spec.key)
        items = list(left.items) if left else []
        taken = {item.id for item in items}
        items += [item for item in (right.items if right else []) if item.id not in taken]
        children = _merge_sections(spec.children, left.children if left else [], right.children if right else [])
        merged.append(Section(spec.key, copy.deepcopy(items), children))
    return merged


def merge_designs(cpd: Artefact, tpd: Artefact, *, pd_id: str | None = None, name: str | None = None) -> Artefact:
    """Fold a CPD and a TPD into one PD artefact.

    Sections follow the PD tree; on shared keys the CPD's items come first
    and the TPD's items are appended. Item ids are kept, so item-level trace
    links stay valid.
    """
    if cpd.kind.code is not KindCode.CPD or tpd.kind.code is not KindCode.TPD:
        raise KindMismatch(f"merge needs a CPD and a TPD, got {cpd.kind} and {tpd.kind}")
    tree = required_sections(PD, TailoringProfile(merge_designs=True))
    sections = _merge_sections(tree, cpd.sections, tpd.sections)
    return Artefact(pd_id or f"PD-{cpd.id}", PD, name or cpd.name, 1, sections)


def retarget_links(links: list[TraceLink], old_ids: set[str], new_id: str) -> list[TraceLink]:
    """Point links at ``new_id`` instead of any of ``old_ids``; drop exact duplicates created."""
    seen: set[tuple] = set()
    result = []
    for link in links:
        moved = TraceLink(
            link.id,
            new_id if link.source in old_ids else link.source,
            new_id if link.target in old_ids else link.target,
            link.kind,
        )
        if moved.triple in seen:
            continue
        seen.add(moved.triple)
        result.append(moved)
    return result


def merge_project_designs(store: ProjectStore, cpd_id: str, tpd_id: str, *, name: str | None = None) -> Artefact:
    """Replace a project's CPD and TPD by one PD and switch the profile to merged."""
    cpd = get_artefact(store, cpd_id)
    tpd = get_artefact(store, tpd_id)
    pd = merge_designs(cpd, tpd, pd_id=store.allocate_id("PD"), name=name)
    old_ids = {cpd_id, tpd_id}
    remaining = {k: v for k, v in store.artefacts.items() if k not in old_ids}

    store.artefacts = remaining
    store.links = retarget_links(store.links, old_ids, pd.id)
    store.manifest.profile = TailoringProfile(
        merge_designs=True,
        selected_supports=store.profile.selected_supports,
        strict_realisation_coverage=False,
        notes=store.profile.notes,
    )
    for it in store.iterations:
        if it.produced & old_ids:
            it.produced = (it.produced - old_ids) | {pd.id}
    for rel in store.releases:
        if rel.payload & old_ids:
            rel.payload = (rel.payload - old_ids) | {pd.id}
    return put_artefact(store, pd)

