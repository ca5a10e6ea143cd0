"""Exception hierarchy with stable machine-readable error codes.

Every domain error carries a `code` string that is used verbatim on the wire
(`{"error":{"code":...,"detail":...}}`), in CLI stderr output, and in tests.
"""

from __future__ import annotations

from typing import Any


class CausalLoopError(Exception):
    code = "Error"

    def __init__(self, detail: str = "", **extra: Any):
        super().__init__(detail or self.code)
        self.detail = detail or self.code
        self.extra = extra

    def to_payload(self) -> dict[str, Any]:
        body: dict[str, Any] = {"code": self.code, "detail": self.detail}
        body.update(self.extra)
        return body


# --- graph document errors ---------------------------------------------------

class DuplicateId(CausalLoopError):
    code = "DuplicateId"


class DuplicateEdge(CausalLoopError):
    code = "DuplicateEdge"


class DuplicateRow(CausalLoopError):
    code = "DuplicateRow"


class UnknownId(CausalLoopError):
    code = "UnknownId"


class UnknownNode(CausalLoopError):
    code = "UnknownNode"


class UnknownEdge(CausalLoopError):
    code = "UnknownEdge"


class UnknownEndpoint(CausalLoopError):
    code = "UnknownEndpoint"


class UnknownParentInKey(CausalLoopError):
    code = "UnknownParentInKey"


class CycleWouldForm(CausalLoopError):
    code = "CycleWouldForm"


class NotADag(CausalLoopError):
    code = "NotADag"


class InvalidVariable(CausalLoopError):
    code = "InvalidVariable"


class InvalidEdge(CausalLoopError):
    code = "InvalidEdge"


class InvalidGraph(CausalLoopError):
    code = "InvalidGraph"


class RowMissing(CausalLoopError):
    code = "RowMissing"


class RowSumNotOne(CausalLoopError):
    code = "RowSumNotOne"


class RowShapeMismatch(CausalLoopError):
    code = "RowShapeMismatch"


class NegativeProbability(CausalLoopError):
    code = "NegativeProbability"


class GraphFileError(CausalLoopError):
    """Structural parse failure; `path` locates the first offending element."""

    code = "ParseError"

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}", path=path)
        self.path = path


# --- inference errors --------------------------------------------------------

class IncompleteAssignment(CausalLoopError):
    code = "IncompleteAssignment"


class ValueNotInDomain(CausalLoopError):
    code = "ValueNotInDomain"


class ZeroProbabilityEvidence(CausalLoopError):
    code = "ZeroProbabilityEvidence"


class ScaleLimit(CausalLoopError):
    code = "ScaleLimit"


class Cancelled(CausalLoopError):
    code = "Cancelled"


class InvalidQuery(CausalLoopError):
    code = "InvalidQuery"


class InvalidArgument(CausalLoopError):
    code = "InvalidArgument"


# --- simulation errors -------------------------------------------------------

class InvalidScenario(CausalLoopError):
    code = "InvalidScenario"


class InvalidPlan(CausalLoopError):
    code = "InvalidPlan"


class InterventionOutOfDomain(CausalLoopError):
    code = "InterventionOutOfDomain"


class NotFound(CausalLoopError):
    code = "NotFound"


# --- session errors ----------------------------------------------------------

class WrongPhase(CausalLoopError):
    code = "WrongPhase"


class StaleBase(CausalLoopError):
    code = "StaleBase"


class ValidationFailed(CausalLoopError):
    """Commit rejected; carries the full validation report."""

    code = "ValidationFailed"

    def __init__(self, detail: str, report: dict[str, Any]):
        super().__init__(detail, report=report)
        self.report = report


class NoCommittedGraph(CausalLoopError):
    code = "NoCommittedGraph"
