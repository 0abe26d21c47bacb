"""Iteration and phase state machine.

An iteration runs Analysis -> Conceptualisation -> Realisation -> Deployment.
Leaving a phase requires its key artefact to exist and be complete. A
shortened iteration stops after Realisation and closes without a release.
"""

from __future__ import annotations

from arspi.errors import (
    ChangeNotAccepted,
    CountMismatch,
    GateNotSatisfied,
    IterationAlreadyRunning,
    IterationNotRunning,
    NoSuccessorPhase,
    PlcMissing,
    ReleaseMissing,
    WrongPhase,
)
from arspi.metamodel import KindCode
from arspi.model import (
    ChangeStatus,
    Iteration,
    IterationInputs,
    IterationState,
    Phase,
)
from arspi.repository import ProjectStore
from arspi.validation import Finding, check_artefact_structure, errors, finding

GATE_KINDS: dict[Phase, tuple[KindCode, ...]] = {
    Phase.ANALYSIS: (KindCode.PRQ,),
    Phase.CONCEPTUALISATION: (KindCode.CPD, KindCode.PD),
    Phase.REALISATION: (KindCode.TPD, KindCode.PD),
}


def plan_project(store: ProjectStore, iteration_count: int, shortened_flags: list[bool]) -> list[Iteration]:
    """Replace the not-yet-started part of the plan."""
    if iteration_count < 1 or len(shortened_flags) != iteration_count:
        raise CountMismatch(f"{iteration_count} iterations need as many shortened flags, got {len(shortened_flags)}")
    started = [it for it in store.iterations if it.state is not IterationState.PLANNED]
    base = max((it.index for it in started), default=0)
    planned = [Iteration(index=base + n + 1, shortened=bool(flag)) for n, flag in enumerate(shortened_flags)]
    store.iterations = started + planned
    return planned


def _resolve(store: ProjectStore, index: int | None) -> Iteration:
    if index is not None:
        return store.iteration(index)
    running = store.running_iteration()
    if running is None:
        raise IterationNotRunning("no iteration is running")
    return running


def start_iteration(
    store: ProjectStore, inputs: IterationInputs | None = None, shortened: bool | None = None
) -> Iteration:
    """Start the next iteration; ``shortened=None`` takes the flag from the plan."""
    running = store.running_iteration()
    if running is not None:
        raise IterationAlreadyRunning(f"iteration {running.index} is still running")
    inputs = inputs or IterationInputs()
    changes = [store.change(cid) for cid in sorted(inputs.changes)]
    for cr in changes:
        if cr.status is not ChangeStatus.ACCEPTED:
            raise ChangeNotAccepted(f"{cr.id} is {cr.status.value}, not accepted")

    index = max((it.index for it in store.iterations if it.state is not IterationState.PLANNED), default=0) + 1
    it = next((i for i in store.iterations if i.index == index and i.state is IterationState.PLANNED), None)
    if it is None:
        it = Iteration(index=index)
        store.iterations.append(it)
        store.iterations.sort(key=lambda i: i.index)
    if shortened is not None:
        it.shortened = shortened
    it.inputs = IterationInputs(
        vision=inputs.vision or store.manifest.vision,
        changes=set(inputs.changes),
        actual_process=inputs.actual_process or store.manifest.actual_process_ref,
    )
    it.state = IterationState.RUNNING
    it.current_phase = Phase.ANALYSIS
    it.phases_visited = [Phase.ANALYSIS]
    for cr in changes:
        cr.status = ChangeStatus.IN_PROGRESS
    return it


def gate_findings(store: ProjectStore, phase: Phase) -> list[Finding]:
    """Errors that keep ``phase`` from being left."""
    kinds = GATE_KINDS.get(phase)
    if kinds is None:
        return []
    arts = [a for a in store.artefacts.values() if a.kind.code in kinds]
    if not arts:
        code = kinds[-1] if store.profile.merge_designs else kinds[0]
        return [finding("MissingKeyArtefact", f"kind:{code.value}", f"{phase.value} needs a {code.value} artefact")]
    return sorted((f for art in arts for f in errors(check_artefact_structure(art))), key=Finding.sort_key)


def _require_gate(store: ProjectStore, it: Iteration) -> None:
    blocking = gate_findings(store, it.current_phase)
    if blocking:
        raise GateNotSatisfied(f"iteration {it.index} cannot leave {it.current_phase.value}", blocking)


def advance_phase(store: ProjectStore, index: int | None = None) -> Phase:
    it = _resolve(store, index)
    if not it.running:
        raise IterationNotRunning(f"iteration {it.index} is {it.state.value}")
    if it.shortened and it.current_phase is Phase.REALISATION:
        close_iteration(store, it.index)
        return it.current_phase
    successor = it.current_phase.successor()
    if successor is None:
        raise NoSuccessorPhase(f"{it.current_phase.value} is the last phase; close the iteration")
    _require_gate(store, it)
    it.current_phase = successor
    it.phases_visited.append(successor)
    return successor


def close_iteration(store: ProjectStore, index: int | None = None) -> Iteration:
    it = _resolve(store, index)
    if not it.running:
        raise IterationNotRunning(f"iteration {it.index} is {it.state.value}")
    if it.shortened:
        if it.current_phase is not Phase.REALISATION:
            raise WrongPhase(f"shortened iteration {it.index} closes after Realisation, not {it.current_phase.value}")
        _require_gate(store, it)
        # unfinished work goes back to the queue for the next iteration
        settle = ChangeStatus.ACCEPTED
    else:
        if it.released is None:
            raise ReleaseMissing(f"iteration {it.index} has not shipped a released PR")
        if not any(a.kind.code is KindCode.PLC for a in store.artefacts.values()):
            raise PlcMissing(f"iteration {it.index} deployed without a PLC artefact")
        settle = ChangeStatus.RESOLVED
    for cid in it.inputs.changes:
        cr = store.change(cid)
        if cr.status is ChangeStatus.IN_PROGRESS:
            cr.status = settle
    it.state = IterationState.CLOSED
    return it


def iteration_status(store: ProjectStore) -> dict:
    running = store.running_iteration()
    return {
        "running": running.index if running else None,
        "phase": running.current_phase.value if running and running.current_phase else None,
        "shortened": running.shortened if running else None,
        "iterations": [it.to_dict() for it in store.iterations],
    }
