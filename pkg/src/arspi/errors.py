"""Exception hierarchy shared by all engine modules."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from arspi.validation import Finding


class ArspiError(Exception):
    """Base class for every error raised by the engine."""


# -- store / persistence (CLI exit status 4) --------------------------------


class StoreError(ArspiError):
    pass


class PathOccupied(StoreError):
    pass


class ProjectNotFound(StoreError):
    pass


class SchemaMismatch(StoreError):
    pass


class StoreLocked(StoreError):
    pass


class CorruptFile(StoreError):
    def __init__(self, path: Path | str, message: str, line: int | None = None):
        self.path = Path(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else str(self.path)
        super().__init__(f"{where}: {message}")


# -- rule violations carrying findings (CLI exit status 2) -------------------


class FindingsError(ArspiError):
    def __init__(self, message: str, findings: Sequence[Finding] = ()):
        self.findings = list(findings)
        super().__init__(message)


class GateNotSatisfied(FindingsError):
    pass


class NotReady(FindingsError):
    pass


# -- domain guard violations (CLI exit status 3) ------------------------------


class KindNotPermitted(ArspiError):
    pass


class KindMismatch(ArspiError):
    pass


class UnknownSupportArtefact(ArspiError):
    pass


class DuplicateName(ArspiError):
    pass


class BuiltinOverwrite(ArspiError):
    pass


class SectionError(ArspiError):
    pass


class ItemPlacementError(ArspiError):
    pass


class ProfileInvalid(ArspiError):
    pass


class UnknownId(ArspiError):
    pass


class DuplicateId(ArspiError):
    pass


class DanglingEndpoint(ArspiError):
    pass


class KindMatrixViolation(ArspiError):
    pass


class IncompatibleRetailoring(ArspiError):
    pass


class UnknownIteration(ArspiError):
    pass


class IterationAlreadyRunning(ArspiError):
    pass


class IterationNotRunning(ArspiError):
    pass


class NoSuccessorPhase(ArspiError):
    pass


class UnknownChange(ArspiError):
    pass


class ChangeNotAccepted(ArspiError):
    pass


class ReleaseMissing(ArspiError):
    pass


class PlcMissing(ArspiError):
    pass


class CountMismatch(ArspiError):
    pass


class WrongPhase(ArspiError):
    pass


class AlreadyReleased(ArspiError):
    pass


class MissingLinkedAssets(ArspiError):
    pass


class InvalidTriageState(ArspiError):
    pass


class SnapshotMismatch(ArspiError):
    pass


class EmptyChangeSet(ArspiError):
    pass
