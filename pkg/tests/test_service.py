import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from causal_loop.service import create_app

from conftest import DATA_DIR
from test_session import NAV3_OPS, failbot_ops


@pytest.fixture
def client(tmp_path):
    app = create_app(tmp_path / "data")
    with TestClient(app) as c:
        yield c


def create_nav3(client) -> str:
    r = client.post("/sessions", json={"scenario": "nav3"})
    assert r.status_code == 201
    sid = r.json()["id"]
    r = client.post(f"/sessions/{sid}/edit",
                    json={"action": "commit", "base_version": 0, "ops": NAV3_OPS})
    assert r.status_code == 200, r.text
    return sid


def create_failbot(client) -> str:
    r = client.post("/sessions", json={"scenario": str(DATA_DIR / "failbot.cg.json")})
    sid = r.json()["id"]
    r = client.post(f"/sessions/{sid}/edit",
                    json={"action": "commit", "base_version": 0, "ops": failbot_ops()})
    assert r.status_code == 200, r.text
    return sid


class TestSessionsApi:
    def test_create_and_get(self, client):
        r = client.post("/sessions", json={"scenario": "pnp10"})
        assert r.status_code == 201
        body = r.json()
        assert body["phase"] == "Editing"
        assert body["version"] == 0
        r2 = client.get(f"/sessions/{body['id']}")
        assert r2.json()["scenario"] == "pnp10"

    def test_unknown_scenario_404(self, client):
        r = client.post("/sessions", json={"scenario": "nowhere"})
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "NotFound"

    def test_unknown_session_404(self, client):
        r = client.get("/sessions/deadbeef")
        assert r.status_code == 404

    def test_list_scenarios(self, client):
        assert client.get("/scenarios").json() == {"scenarios": ["pnp10", "nav3"]}


class TestEditApi:
    def test_commit_then_graph_bytes_stable(self, client):
        sid = create_nav3(client)
        a = client.get(f"/sessions/{sid}/graph?version=1").content
        b = client.get(f"/sessions/{sid}/graph?version=1").content
        assert a == b
        doc = json.loads(a)
        assert doc["version"] == 1
        assert len(doc["edges"]) == 2

    def test_validation_failure_carries_report(self, client):
        r = client.post("/sessions", json={"scenario": "nav3"})
        sid = r.json()["id"]
        r = client.post(f"/sessions/{sid}/edit", json={
            "action": "commit", "base_version": 0,
            "ops": [{"op": "add_edge", "src": "B", "dst": "V"}],
        })
        assert r.status_code == 422
        err = r.json()["error"]
        assert err["code"] == "ValidationFailed"
        assert err["report"]["is_valid"] is False

    def test_stale_base_conflict(self, client):
        sid = create_nav3(client)
        r = client.post(f"/sessions/{sid}/edit",
                        json={"action": "commit", "base_version": 0, "ops": []})
        assert r.status_code == 409
        assert r.json()["error"]["code"] == "StaleBase"

    def test_domain_error_code_passthrough(self, client):
        r = client.post("/sessions", json={"scenario": "nav3"})
        sid = r.json()["id"]
        r = client.post(f"/sessions/{sid}/edit", json={
            "action": "commit", "base_version": 0,
            "ops": [{"op": "add_edge", "src": "B", "dst": "Nope"}],
        })
        assert r.status_code == 400
        assert r.json()["error"]["code"] == "UnknownEndpoint"


class TestQueryApi:
    def test_query_tagged_with_version(self, client):
        sid = create_nav3(client)
        r = client.post(f"/sessions/{sid}/query",
                        json={"target": "V", "do": {"B": "full"}})
        body = r.json()
        assert body["graph_version"] == 1
        assert body["p"] == pytest.approx([0.18, 0.36, 0.46], abs=1e-12)

    def test_query_before_commit_conflict(self, client):
        r = client.post("/sessions", json={"scenario": "nav3"})
        sid = r.json()["id"]
        r = client.post(f"/sessions/{sid}/query", json={"target": "V"})
        assert r.status_code == 409
        assert r.json()["error"]["code"] == "NoCommittedGraph"

    def test_zero_probability_evidence_code(self, client):
        sid = create_nav3(client)
        r = client.post(f"/sessions/{sid}/query", json={
            "target": "V", "do": {"B": "full"}, "given": {"B": "low"},
        })
        assert r.status_code == 400
        assert r.json()["error"]["code"] == "InvalidQuery"

    def test_counterfactual_over_wire(self, client):
        sid = create_nav3(client)
        r = client.post(f"/sessions/{sid}/query", json={
            "kind": "counterfactual", "target": "V",
            "given": {"V": "slow", "T": "rough"}, "do": {"B": "full"},
        })
        assert r.status_code == 200
        assert r.json()["meta"]["method"] == "noise_enumeration"


class TestExecuteApi:
    def test_execute_and_respond_cycle(self, client):
        sid = create_failbot(client)
        r = client.post(f"/sessions/{sid}/execute", json={"trials": 3, "seed": 1})
        assert r.json()["phase"] == "AwaitingOperator"
        r = client.post(f"/sessions/{sid}/respond", json={"continue": False})
        assert r.json()["phase"] == "Ready"

    def test_execute_wrong_phase(self, client):
        r = client.post("/sessions", json={"scenario": "nav3"})
        sid = r.json()["id"]
        r = client.post(f"/sessions/{sid}/execute", json={"trials": 1, "seed": 0})
        assert r.status_code == 409
        assert r.json()["error"]["code"] == "WrongPhase"

    def test_events_pagination(self, client):
        sid = create_failbot(client)
        client.post(f"/sessions/{sid}/execute", json={"trials": 2, "seed": 1})
        all_events = client.get(f"/sessions/{sid}/events").json()["events"]
        seqs = [e["seq"] for e in all_events]
        assert seqs == list(range(1, len(seqs) + 1))
        tail = client.get(f"/sessions/{sid}/events?from_seq=2").json()["events"]
        assert tail == all_events[2:]

    def test_background_execution_reaches_breakpoint(self, client):
        sid = create_failbot(client)
        r = client.post(f"/sessions/{sid}/execute",
                        json={"trials": 2, "seed": 1, "background": True})
        assert r.status_code == 200
        deadline = time.time() + 5
        phase = None
        while time.time() < deadline:
            phase = client.get(f"/sessions/{sid}").json()["phase"]
            if phase == "AwaitingOperator":
                break
            time.sleep(0.02)
        assert phase == "AwaitingOperator"


class TestInfluenceApi:
    def test_influence_endpoint(self, client):
        sid = create_nav3(client)
        r = client.get(f"/sessions/{sid}/influence?version=1")
        body = r.json()
        assert body["version"] == 1
        by_edge = {(e["src"], e["dst"]): e["influence"] for e in body["edges"]}
        assert by_edge[("B", "V")] == pytest.approx(0.45, abs=1e-12)


class TestEventStream:
    def test_websocket_replay_and_live(self, client):
        sid = create_failbot(client)
        client.post(f"/sessions/{sid}/execute", json={"trials": 2, "seed": 1})
        with client.websocket_connect(f"/sessions/{sid}/events?from_seq=0") as ws:
            seen = []
            while len(seen) < 6:
                seen.append(ws.receive_json())
            kinds = [e["kind"] for e in seen]
            assert kinds[0] == "graph_committed"
            assert "ask_continue" in kinds
            # respond over the bidirectional channel; more events stream in
            ws.send_json({"kind": "respond", "continue": True})
            more = ws.receive_json()
            assert more["seq"] == seen[-1]["seq"] + 1

    def test_websocket_resume_from_seq(self, client):
        sid = create_failbot(client)
        client.post(f"/sessions/{sid}/execute", json={"trials": 2, "seed": 1})
        events = client.get(f"/sessions/{sid}/events").json()["events"]
        with client.websocket_connect(f"/sessions/{sid}/events?from_seq=3") as ws:
            first = ws.receive_json()
            assert first == events[3]


class TestPersistenceAcrossApps:
    def test_sessions_survive_restart(self, tmp_path):
        data = tmp_path / "data"
        app1 = create_app(data)
        with TestClient(app1) as c1:
            sid = create_nav3(c1)
            graph_bytes = c1.get(f"/sessions/{sid}/graph?version=1").content
        app2 = create_app(data)
        with TestClient(app2) as c2:
            r = c2.get(f"/sessions/{sid}")
            assert r.status_code == 200
            assert r.json()["version"] == 1
            assert c2.get(f"/sessions/{sid}/graph?version=1").content == graph_bytes
