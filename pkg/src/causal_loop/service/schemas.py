"""Pydantic request/response models for the wire protocol."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class CreateSessionRequest(BaseModel):
    scenario: str
    ask_every_n_failures: int = 1
    progress_every_n: int = 0


class SessionView(BaseModel):
    id: str
    scenario: str
    phase: str
    version: int
    last_seq: int
    pending_prompt: Optional[dict[str, Any]] = None
    open_transaction: bool = False


class EditRequest(BaseModel):
    action: Literal["begin", "commit"]
    base_version: Optional[int] = None
    ops: list[dict[str, Any]] = Field(default_factory=list)


class EditResult(BaseModel):
    phase: str
    version: Optional[int] = None
    base_version: Optional[int] = None


class QueryRequest(BaseModel):
    kind: Literal["query", "counterfactual"] = "query"
    target: str
    do: dict[str, str] = Field(default_factory=dict)
    given: dict[str, str] = Field(default_factory=dict)
    seed: int = 0


class DistributionView(BaseModel):
    variable: str
    domain: list[str]
    p: list[float]
    meta: dict[str, Any] = Field(default_factory=dict)
    graph_version: int


class ExecuteRequest(BaseModel):
    trials: int = 1
    seed: int = 0
    forced: dict[str, str] = Field(default_factory=dict)
    background: bool = False


class RespondRequest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    cont: bool = Field(alias="continue")


class EventView(BaseModel):
    seq: int
    kind: str
    payload: dict[str, Any]


class EventsPage(BaseModel):
    events: list[EventView]
    last_seq: int


class EdgeInfluenceView(BaseModel):
    src: str
    dst: str
    strength: float
    influence: float


class InfluencePage(BaseModel):
    version: int
    edges: list[EdgeInfluenceView]


class ErrorBody(BaseModel):
    code: str
    detail: str


class ErrorEnvelope(BaseModel):
    error: dict[str, Any]
