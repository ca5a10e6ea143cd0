"""HTTP + WebSocket wire protocol over the session state machine.

Command endpoints are synchronous (FastAPI runs them on the thread pool); the
session's internal lock serializes commands per session, and queries compute
on graph snapshots without holding that lock. `/sessions/{id}/events` is the
persistent channel: it replays the append-only event log from `from_seq` and
then tails it, so reconnecting clients always see identical content.
"""

from __future__ import annotations

import asyncio
import threading
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..errors import (
    CausalLoopError,
    GraphFileError,
    NoCommittedGraph,
    NotFound,
    StaleBase,
    ValidationFailed,
    WrongPhase,
)
from ..session import Plan, SessionConfig, SessionManager
from ..simulation import BUNDLED
from .schemas import (
    CreateSessionRequest,
    DistributionView,
    EditRequest,
    EditResult,
    EventsPage,
    ExecuteRequest,
    InfluencePage,
    QueryRequest,
    RespondRequest,
    SessionView,
)

_STATUS = {
    NotFound.code: 404,
    WrongPhase.code: 409,
    StaleBase.code: 409,
    NoCommittedGraph.code: 409,
    ValidationFailed.code: 422,
    GraphFileError.code: 400,
}


def create_app(data_dir: str | Path | None = None,
               manager: SessionManager | None = None) -> FastAPI:
    app = FastAPI(title="causal-loop", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    app.state.manager = manager or SessionManager(data_dir)

    @app.exception_handler(CausalLoopError)
    async def handle_domain_error(_: Request, exc: CausalLoopError) -> JSONResponse:
        status = _STATUS.get(exc.code, 400)
        return JSONResponse(status_code=status, content={"error": exc.to_payload()})

    def mgr() -> SessionManager:
        return app.state.manager

    @app.get("/scenarios")
    def list_scenarios() -> dict[str, Any]:
        return {"scenarios": list(BUNDLED)}

    @app.get("/sessions")
    def list_sessions() -> list[SessionView]:
        return [SessionView(**s) for s in mgr().list()]

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest) -> SessionView:
        config = SessionConfig(
            ask_every_n_failures=req.ask_every_n_failures,
            progress_every_n=req.progress_every_n,
        )
        session = mgr().create(req.scenario, config=config)
        return SessionView(**session.state())

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> SessionView:
        return SessionView(**mgr().get(session_id).state())

    @app.get("/sessions/{session_id}/graph")
    def get_graph(session_id: str, version: int | None = None) -> Response:
        text = mgr().get(session_id).graph_text(version)
        return Response(content=text, media_type="application/json")

    @app.post("/sessions/{session_id}/edit")
    def edit(session_id: str, req: EditRequest) -> EditResult:
        session = mgr().get(session_id)
        if req.action == "begin":
            return EditResult(**session.begin_edit())
        if req.base_version is None:
            raise StaleBase("commit requires base_version")
        return EditResult(**session.commit_edit(req.base_version, req.ops))

    @app.post("/sessions/{session_id}/query")
    def run_query(session_id: str, req: QueryRequest) -> DistributionView:
        doc = mgr().get(session_id).run_query(req.model_dump())
        return DistributionView(**doc)

    @app.post("/sessions/{session_id}/execute")
    def execute(session_id: str, req: ExecuteRequest) -> SessionView:
        session = mgr().get(session_id)
        plan = Plan(trials=req.trials, seed=req.seed, forced=dict(req.forced))
        if req.background:
            with session._lock:
                # surface phase errors synchronously before detaching
                if session.phase.value != "Ready":
                    raise WrongPhase(f"cannot execute while {session.phase.value}")
            threading.Thread(
                target=session.start_execution, args=(plan,), daemon=True,
            ).start()
            return SessionView(**session.state())
        return SessionView(**session.start_execution(plan))

    @app.post("/sessions/{session_id}/respond")
    def respond(session_id: str, req: RespondRequest) -> SessionView:
        return SessionView(**mgr().get(session_id).respond(req.cont))

    @app.get("/sessions/{session_id}/events")
    def get_events(session_id: str, from_seq: int = 0) -> EventsPage:
        session = mgr().get(session_id)
        events = [e.to_dict() for e in session.events_since(from_seq)]
        return EventsPage(events=events, last_seq=session.last_seq)

    @app.get("/sessions/{session_id}/influence")
    def influence(session_id: str, version: int | None = None) -> InfluencePage:
        session = mgr().get(session_id)
        from ..graph_io import loads_graph

        graph = loads_graph(session.graph_text(version))
        edges = []
        if graph.validate().is_valid:
            for e in graph.edges:
                edges.append({
                    "src": e.src, "dst": e.dst, "strength": e.strength,
                    "influence": graph.edge_influence(e.src, e.dst),
                })
        return InfluencePage(version=graph.version, edges=edges)

    @app.websocket("/sessions/{session_id}/events")
    async def event_stream(ws: WebSocket, session_id: str, from_seq: int = 0) -> None:
        await ws.accept()
        try:
            session = mgr().get(session_id)
        except NotFound as exc:
            await ws.send_json({"error": exc.to_payload()})
            await ws.close(code=4004)
            return
        last = from_seq
        loop = asyncio.get_event_loop()

        async def pump_outbound() -> None:
            nonlocal last
            while True:
                events = session.events_since(last)
                for event in events:
                    await ws.send_json(event.to_dict())
                    last = event.seq
                await asyncio.sleep(0.05)

        async def pump_inbound() -> None:
            while True:
                msg = await ws.receive_json()
                if msg.get("kind") == "respond":
                    try:
                        await loop.run_in_executor(
                            None, session.respond, bool(msg.get("continue", False))
                        )
                    except CausalLoopError as exc:
                        await ws.send_json({"error": exc.to_payload()})

        outbound = asyncio.ensure_future(pump_outbound())
        inbound = asyncio.ensure_future(pump_inbound())
        try:
            await asyncio.wait([outbound, inbound], return_when=asyncio.FIRST_EXCEPTION)
        except WebSocketDisconnect:
            pass
        finally:
            outbound.cancel()
            inbound.cancel()

    return app
