"""Live sessions: the human-in-the-loop edit/validate/execute/notify cycle.

Each session is a single logical state machine; commands are serialized by a
re-entrant lock. Execution runs to a breakpoint: it returns when the batch
completes or when a failure raises the operator prompt, so phase transitions
are deterministic and testable without races. Every state change that matters
is an event in an append-only per-session log; replaying the log reconstructs
the session, including a paused batch.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from dataclasses import replace as _dc_replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping

from .errors import (
    NoCommittedGraph,
    NotFound,
    StaleBase,
    ValidationFailed,
    WrongPhase,
)
from .graph import CausalGraph, Mechanism, Variable
from .graph_io import dumps_graph, graph_from_dict, graph_to_dict
from .inference import Distribution, Intervention, Query, counterfactual, query
from .simulation import Plan, Scenario, TrialResult, _Executor, load_scenario, summarize


class Phase(str, Enum):
    EDITING = "Editing"
    READY = "Ready"
    EXECUTING = "Executing"
    AWAITING_OPERATOR = "AwaitingOperator"


class EventKind(str, Enum):
    PHASE_CHANGED = "phase_changed"
    TRIAL_RESULT = "trial_result"
    BATCH_PROGRESS = "batch_progress"
    NOTIFY_FAILURE = "notify_failure"
    ASK_CONTINUE = "ask_continue"
    GRAPH_COMMITTED = "graph_committed"


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"seq": self.seq, "kind": self.kind, "payload": self.payload}


@dataclass
class SessionConfig:
    ask_every_n_failures: int = 1
    progress_every_n: int = 0  # 0 disables batch_progress events


@dataclass
class _PendingBatch:
    plan: Plan
    next_index: int = 0
    successes: int = 0
    failures: int = 0
    results: list[TrialResult] = field(default_factory=list)


def template_graph(scenario: Scenario) -> CausalGraph:
    """Version-0 operator graph: the scenario's variables, no edges or CPTs."""
    g = CausalGraph(version=0)
    for v in scenario.ground_truth.variables:
        g = g.add_node(Variable(id=v.id, domain=v.domain, note=v.note))
    return g


class Session:
    """One operator session bound to a scenario."""

    def __init__(
        self,
        scenario_name: str,
        *,
        session_id: str | None = None,
        data_dir: Path | None = None,
        config: SessionConfig | None = None,
        event_listener: Callable[[Event], None] | None = None,
    ):
        self.id = session_id or uuid.uuid4().hex[:12]
        self.scenario_name = scenario_name
        self.scenario = load_scenario(scenario_name)
        self.config = config or SessionConfig()
        self.data_dir = Path(data_dir) if data_dir else None
        self._listener = event_listener
        self._lock = threading.RLock()
        self.phase = Phase.EDITING
        self.pending_prompt: dict[str, Any] | None = None
        self._events: list[Event] = []
        self._graph_versions: list[str] = [dumps_graph(template_graph(self.scenario))]
        self._graphs: list[CausalGraph] = [template_graph(self.scenario)]
        self._open_transaction = False
        self._pending: _PendingBatch | None = None
        self._failures_since_ask = 0
        self._executor: _Executor | None = None
        self._abort_requested = False
        if self.data_dir is not None:
            self._init_storage()

    # --- state views ----------------------------------------------------------

    @property
    def version(self) -> int:
        return len(self._graph_versions) - 1

    @property
    def last_seq(self) -> int:
        return self._events[-1].seq if self._events else 0

    def current_graph(self) -> CausalGraph:
        return self._graphs[-1]

    def graph_text(self, version: int | None = None) -> str:
        with self._lock:
            v = self.version if version is None else version
            if not 0 <= v <= self.version:
                raise NotFound(f"session {self.id} has no graph version {v}")
            return self._graph_versions[v]

    def events_since(self, from_seq: int = 0) -> list[Event]:
        with self._lock:
            return [e for e in self._events if e.seq > from_seq]

    def state(self) -> dict[str, Any]:
        with self._lock:
            return {
                "id": self.id,
                "scenario": self.scenario_name,
                "phase": self.phase.value,
                "version": self.version,
                "last_seq": self.last_seq,
                "pending_prompt": self.pending_prompt,
                "open_transaction": self._open_transaction,
            }

    # --- events ----------------------------------------------------------------

    def _emit(self, kind: EventKind, payload: dict[str, Any]) -> Event:
        event = Event(seq=self.last_seq + 1, kind=kind.value, payload=payload)
        self._events.append(event)
        if self.data_dir is not None:
            with self._events_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(event.to_dict()) + "\n")
        if self._listener is not None:
            self._listener(event)
        return event

    def _set_phase(self, phase: Phase, **payload: Any) -> None:
        self.phase = phase
        self._emit(EventKind.PHASE_CHANGED, {"phase": phase.value, **payload})

    # --- editing ----------------------------------------------------------------

    def begin_edit(self) -> dict[str, Any]:
        with self._lock:
            if self.phase not in (Phase.EDITING, Phase.READY):
                raise WrongPhase(f"cannot edit while {self.phase.value}")
            self.phase = Phase.EDITING
            self._open_transaction = True
            return {"phase": self.phase.value, "base_version": self.version}

    def commit_edit(self, base_version: int, ops: list[Mapping[str, Any]]) -> dict[str, Any]:
        with self._lock:
            if self.phase not in (Phase.EDITING, Phase.READY):
                raise WrongPhase(f"cannot edit while {self.phase.value}")
            if base_version != self.version:
                raise StaleBase(
                    f"transaction base {base_version} != current version {self.version}"
                )
            self.phase = Phase.EDITING
            self._open_transaction = True
            graph = apply_ops(self.current_graph(), ops)
            report = graph.validate()
            if not report.is_valid:
                raise ValidationFailed("commit rejected by validation", report.to_dict())
            graph = _dc_replace(graph, version=self.version + 1)
            text = dumps_graph(graph)
            self._graphs.append(graph)
            self._graph_versions.append(text)
            self._open_transaction = False
            self.phase = Phase.READY
            self._emit(EventKind.GRAPH_COMMITTED, {
                "version": graph.version,
                "graph": graph_to_dict(graph),
            })
            return {"phase": self.phase.value, "version": graph.version}

    # --- queries -----------------------------------------------------------------

    def run_query(self, payload: Mapping[str, Any]) -> dict[str, Any]:
        with self._lock:
            if self.version < 1:
                raise NoCommittedGraph("no committed graph version yet")
            graph = self.current_graph()
            version = self.version
        # computed outside the lock: queries never block the state machine
        kind = payload.get("kind", "query")
        target = payload.get("target", "")
        do = dict(payload.get("do", {}))
        given = dict(payload.get("given", {}))
        if kind == "counterfactual":
            dist = counterfactual(
                graph, given, Intervention(do), target,
                seed=int(payload.get("seed", 0)),
            )
        else:
            dist = query(graph, Query(target=target, evidence=given,
                                      interventions=Intervention(do)))
        doc = dist.to_dict()
        doc["graph_version"] = version
        return doc

    # --- execution ----------------------------------------------------------------

    def start_execution(self, plan: Plan | Mapping[str, Any]) -> dict[str, Any]:
        if not isinstance(plan, Plan):
            plan = Plan.from_dict(plan)
        with self._lock:
            if self.phase != Phase.READY:
                raise WrongPhase(f"cannot execute while {self.phase.value}")
            plan.check(self.scenario)
            self._executor = _Executor(self.scenario, plan, self.current_graph())
            self._pending = _PendingBatch(plan=plan)
            self._failures_since_ask = 0
            self._abort_requested = False
            self._set_phase(Phase.EXECUTING, plan=plan.to_dict())
        self._run_to_breakpoint()
        return self.state()

    def respond(self, cont: bool) -> dict[str, Any]:
        with self._lock:
            if self.phase != Phase.AWAITING_OPERATOR or self.pending_prompt is None:
                raise WrongPhase("no pending operator prompt")
            self.pending_prompt = None
            pending = self._pending
            assert pending is not None
            if not cont:
                summary = summarize(self.scenario, pending.plan, pending.results,
                                    aborted=True)
                self._pending = None
                self._executor = None
                self._set_phase(Phase.READY, summary=summary.to_dict())
                return self.state()
            if self._executor is None:
                # resumed after a restart: rebuild from the replayed plan
                self._executor = _Executor(self.scenario, pending.plan,
                                           self.current_graph())
            self._set_phase(Phase.EXECUTING, resumed=True)
        self._run_to_breakpoint()
        return self.state()

    def _run_to_breakpoint(self) -> None:
        """Run trials until the batch ends or a failure raises the prompt."""
        while True:
            with self._lock:
                if self.phase != Phase.EXECUTING or self._pending is None:
                    return
                pending = self._pending
                executor = self._executor
                index = pending.next_index
                plan = pending.plan
                if index >= plan.trials or self._abort_requested:
                    summary = summarize(self.scenario, plan, pending.results,
                                        aborted=self._abort_requested)
                    self._pending = None
                    self._executor = None
                    self._set_phase(Phase.READY, summary=summary.to_dict())
                    return
            assert executor is not None
            result = executor.run(index)  # outside the lock
            with self._lock:
                if self._pending is not pending:
                    return
                pending.next_index = index + 1
                pending.results.append(result)
                pending.successes += result.success
                pending.failures += not result.success
                self._emit(EventKind.TRIAL_RESULT, result.to_dict())
                if self.config.progress_every_n and (
                        (index + 1) % self.config.progress_every_n == 0):
                    self._emit(EventKind.BATCH_PROGRESS, {
                        "completed": index + 1, "total": plan.trials,
                    })
                if not result.success:
                    self._failures_since_ask += 1
                    if self._failures_since_ask >= self.config.ask_every_n_failures:
                        self._failures_since_ask = 0
                        self._emit(EventKind.NOTIFY_FAILURE, {
                            "trial": result.to_dict(),
                            "message": f"trial {result.index} failed"
                                       f" ({result.failure_reason})",
                        })
                        prompt = {
                            "question": "Continue?",
                            "trial": result.to_dict(),
                            "progress": {
                                "completed": pending.next_index,
                                "total": plan.trials,
                                "successes": pending.successes,
                                "failures": pending.failures,
                            },
                        }
                        self._emit(EventKind.ASK_CONTINUE, prompt)
                        self.pending_prompt = prompt
                        self._set_phase(Phase.AWAITING_OPERATOR)
                        return

    # --- persistence ----------------------------------------------------------------

    @property
    def _events_path(self) -> Path:
        assert self.data_dir is not None
        return self.data_dir / f"{self.id}.events.jsonl"

    @property
    def _meta_path(self) -> Path:
        assert self.data_dir is not None
        return self.data_dir / f"{self.id}.meta.json"

    def _init_storage(self) -> None:
        assert self.data_dir is not None
        self.data_dir.mkdir(parents=True, exist_ok=True)
        if not self._meta_path.exists():
            self._meta_path.write_text(json.dumps({
                "id": self.id,
                "scenario": self.scenario_name,
                "config": {
                    "ask_every_n_failures": self.config.ask_every_n_failures,
                    "progress_every_n": self.config.progress_every_n,
                },
            }, indent=2) + "\n", encoding="utf-8")
        if not self._events_path.exists():
            self._events_path.touch()

    @classmethod
    def replay(cls, meta_path: Path) -> "Session":
        """Reconstruct a session from its meta file and event log."""
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        cfg = meta.get("config", {})
        session = cls(
            meta["scenario"],
            session_id=meta["id"],
            data_dir=meta_path.parent,
            config=SessionConfig(
                ask_every_n_failures=cfg.get("ask_every_n_failures", 1),
                progress_every_n=cfg.get("progress_every_n", 0),
            ),
        )
        for line in session._events_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            event = Event(seq=doc["seq"], kind=doc["kind"], payload=doc["payload"])
            session._events.append(event)
            session._apply_replayed(event)
        if session.phase == Phase.EXECUTING:
            # crashed mid-batch: remaining trials never ran
            session.phase = Phase.READY
            session._pending = None
        return session

    def _apply_replayed(self, event: Event) -> None:
        kind = event.kind
        payload = event.payload
        if kind == EventKind.GRAPH_COMMITTED.value:
            graph = graph_from_dict(payload["graph"])
            self._graphs.append(graph)
            self._graph_versions.append(dumps_graph(graph))
            self.phase = Phase.READY
            self._open_transaction = False
        elif kind == EventKind.PHASE_CHANGED.value:
            self.phase = Phase(payload["phase"])
            if self.phase == Phase.EXECUTING and "plan" in payload:
                self._pending = _PendingBatch(plan=Plan.from_dict(payload["plan"]))
                self._failures_since_ask = 0
            elif self.phase == Phase.READY:
                self._pending = None
                self._executor = None
            if self.phase != Phase.AWAITING_OPERATOR:
                self.pending_prompt = None
        elif kind == EventKind.TRIAL_RESULT.value:
            if self._pending is not None:
                result = TrialResult(
                    index=payload["index"], world=payload["world"],
                    gripper_mode=payload["gripper_mode"], success=payload["success"],
                    failure_reason=payload.get("failure_reason"),
                )
                self._pending.results.append(result)
                self._pending.next_index = payload["index"] + 1
                self._pending.successes += result.success
                self._pending.failures += not result.success
                if not result.success:
                    self._failures_since_ask += 1
        elif kind == EventKind.NOTIFY_FAILURE.value:
            self._failures_since_ask = 0
        elif kind == EventKind.ASK_CONTINUE.value:
            self.pending_prompt = payload


def apply_ops(graph: CausalGraph, ops: list[Mapping[str, Any]]) -> CausalGraph:
    """Apply a transaction's edit operations in order; returns the new graph."""
    g = graph
    for op in ops:
        kind = op.get("op")
        if kind == "add_node":
            g = g.add_node(Variable(
                id=op["id"], domain=tuple(op["domain"]),
                note=op.get("note", ""), prominence=float(op.get("prominence", 0.5)),
            ))
        elif kind == "add_edge":
            g = g.add_edge(op["src"], op["dst"], float(op.get("strength", 0.5)))
        elif kind == "remove":
            g = g.remove_element(op["id"])
        elif kind == "set_mechanism":
            g = g.set_mechanism(Mechanism.from_rows(op["node"], op["rows"]))
        elif kind == "annotate":
            pos = op.get("position")
            g = g.annotate(
                op["id"],
                note=op.get("note"),
                prominence=op.get("prominence"),
                strength=op.get("strength"),
                position=tuple(pos) if pos is not None else None,
            )
        else:
            raise ValidationFailed(f"unknown edit op {kind!r}", {"op": dict(op)})
    return g


class SessionManager:
    """Owns sessions; loads persisted ones from the data directory."""

    def __init__(self, data_dir: str | Path | None = None):
        self.data_dir = Path(data_dir) if data_dir else None
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        if self.data_dir is not None and self.data_dir.exists():
            for meta_path in sorted(self.data_dir.glob("*.meta.json")):
                session = Session.replay(meta_path)
                self._sessions[session.id] = session

    def create(self, scenario_name: str, config: SessionConfig | None = None) -> Session:
        session = Session(scenario_name, data_dir=self.data_dir, config=config)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise NotFound(f"no session {session_id!r}")
        return session

    def list(self) -> list[dict[str, Any]]:
        with self._lock:
            return [s.state() for s in self._sessions.values()]
