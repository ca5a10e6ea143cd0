"""Command line interface.

File-oriented commands (`validate`, `query`, `bench`, `simulate`) run the core
library directly so they are deterministic and scriptable; `serve` launches
the HTTP service; the `session` group is a thin client for a running server.

Exit codes: 0 success, 1 domain error (validation/query/simulation failures,
reported as JSON on stderr), 2 usage or file-parse errors. stdout carries only
the result document.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Any

import click

from .errors import CausalLoopError, GraphFileError
from .graph_io import graph_hash, load_graph
from .inference import Intervention, Query, counterfactual, query as run_query_op
from .simulation import Plan, bench_intervention, load_scenario, run_batch

DEFAULT_PORT = 8742
DEFAULT_SERVER = f"http://127.0.0.1:{DEFAULT_PORT}"


def _fail(exc: CausalLoopError, code: int = 1) -> None:
    click.echo(json.dumps({"error": exc.to_payload()}), err=True)
    sys.exit(code)


def _parse_assignments(pairs: tuple[str, ...], flag: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.UsageError(f"{flag} expects NAME=VALUE, got {pair!r}")
        name, _, value = pair.partition("=")
        out[name] = value
    return out


def _load_graph_or_exit(path: str):
    try:
        return load_graph(path)
    except GraphFileError as exc:
        click.echo(json.dumps({"error": exc.to_payload()}), err=True)
        sys.exit(2)


@click.group()
def main() -> None:
    """Causal graph workbench: validate, query, simulate, serve."""


@main.command()
@click.argument("path", type=click.Path())
def validate(path: str) -> None:
    """Validate a graph file; exit 0 iff it is a valid causal graph."""
    graph = _load_graph_or_exit(path)
    report = graph.validate()
    click.echo(json.dumps(report.to_dict(), indent=2))
    sys.exit(0 if report.is_valid else 1)


@main.command(name="query")
@click.argument("path", type=click.Path())
@click.option("--target", required=True, help="Variable to query.")
@click.option("--do", "do_", multiple=True, help="Intervention NAME=VALUE (repeatable).")
@click.option("--given", multiple=True, help="Evidence NAME=VALUE (repeatable).")
@click.option("--counterfactual", "cf", is_flag=True,
              help="Answer the counterfactual P(target_do | given) instead.")
@click.option("--seed", default=0, show_default=True,
              help="Seed for the counterfactual MC fallback.")
def query_cmd(path: str, target: str, do_: tuple[str, ...], given: tuple[str, ...],
              cf: bool, seed: int) -> None:
    """Print the distribution of TARGET under evidence and interventions."""
    graph = _load_graph_or_exit(path)
    do = _parse_assignments(do_, "--do")
    evidence = _parse_assignments(given, "--given")
    try:
        if cf:
            dist = counterfactual(graph, evidence, Intervention(do), target, seed=seed)
        else:
            dist = run_query_op(graph, Query(
                target=target, evidence=evidence, interventions=Intervention(do),
            ))
    except CausalLoopError as exc:
        _fail(exc)
        return
    doc = dist.to_dict()
    doc["graph_sha256"] = graph_hash(graph)
    click.echo(json.dumps(doc, indent=2))


@main.command()
@click.argument("scenario")
@click.argument("graph_path", type=click.Path())
@click.option("--intervene", required=True, help="Exposed attribute to intervene on.")
@click.option("--n", default=2000, show_default=True, help="Trials per arm.")
@click.option("--seed", default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Write the report to a file instead of stdout.")
def bench(scenario: str, graph_path: str, intervene: str, n: int, seed: int,
          fmt: str, out: str | None) -> None:
    """Benchmark success rates per forced value of an attribute vs control."""
    operator_graph = _load_graph_or_exit(graph_path)
    try:
        scn = load_scenario(scenario)
        report = bench_intervention(scn, operator_graph, intervene, n, seed=seed)
    except CausalLoopError as exc:
        _fail(exc)
        return
    text = report.to_csv() if fmt == "csv" else report.to_json()
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("scenario")
@click.argument("graph_path", type=click.Path())
@click.option("--n", default=100, show_default=True, help="Number of trials.")
@click.option("--seed", default=0, show_default=True)
@click.option("--force", multiple=True, help="Forced attribute NAME=VALUE (repeatable).")
def simulate(scenario: str, graph_path: str, n: int, seed: int,
             force: tuple[str, ...]) -> None:
    """Run a batch of trials guided by the operator graph; print the summary."""
    operator_graph = _load_graph_or_exit(graph_path)
    forced = _parse_assignments(force, "--force")
    try:
        scn = load_scenario(scenario)
        summary = run_batch(scn, Plan(trials=n, seed=seed, forced=forced), operator_graph)
    except CausalLoopError as exc:
        _fail(exc)
        return
    click.echo(summary.to_json(), nl=False)


@main.command()
@click.option("--port", default=DEFAULT_PORT, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", default=None,
              help="Session storage directory (default: $CAUSAL_LOOP_DATA or ./causal_loop_data).")
def serve(port: int, host: str, data_dir: str | None) -> None:
    """Launch the session service."""
    import uvicorn

    from .service import create_app

    resolved = data_dir or os.environ.get("CAUSAL_LOOP_DATA") or "./causal_loop_data"
    app = create_app(resolved)
    uvicorn.run(app, host=host, port=port)


# --- thin HTTP client for session workflows -----------------------------------

@main.group()
@click.option("--server", default=None,
              help=f"Service base URL (default: $CAUSAL_LOOP_SERVER or {DEFAULT_SERVER}).")
@click.pass_context
def session(ctx: click.Context, server: str | None) -> None:
    """Interact with a running causal-loop server."""
    ctx.obj = server or os.environ.get("CAUSAL_LOOP_SERVER") or DEFAULT_SERVER


def _request(base: str, method: str, path: str, body: dict[str, Any] | None = None) -> Any:
    import httpx

    resp = httpx.request(method, base.rstrip("/") + path, json=body, timeout=120.0)
    if resp.status_code >= 400:
        try:
            payload = resp.json()
        except ValueError:
            payload = {"error": {"code": "HTTPError", "detail": resp.text}}
        click.echo(json.dumps(payload), err=True)
        sys.exit(1)
    return resp


@session.command("create")
@click.argument("scenario")
@click.pass_obj
def session_create(base: str, scenario: str) -> None:
    resp = _request(base, "POST", "/sessions", {"scenario": scenario})
    click.echo(json.dumps(resp.json(), indent=2))


@session.command("show")
@click.argument("session_id")
@click.pass_obj
def session_show(base: str, session_id: str) -> None:
    resp = _request(base, "GET", f"/sessions/{session_id}")
    click.echo(json.dumps(resp.json(), indent=2))


@session.command("edit")
@click.argument("session_id")
@click.option("--begin", is_flag=True, help="Open an edit transaction.")
@click.option("--base", "base_version", type=int, default=None,
              help="Base graph version for a commit.")
@click.option("--ops-file", type=click.Path(), default=None,
              help="JSON file with the transaction's edit operations.")
@click.pass_obj
def session_edit(base: str, session_id: str, begin: bool, base_version: int | None,
                 ops_file: str | None) -> None:
    """Begin a transaction, or commit one from an ops file."""
    if begin:
        resp = _request(base, "POST", f"/sessions/{session_id}/edit", {"action": "begin"})
        click.echo(json.dumps(resp.json(), indent=2))
        return
    if ops_file is None or base_version is None:
        raise click.UsageError("commit needs --base and --ops-file (or pass --begin)")
    ops = json.loads(Path(ops_file).read_text(encoding="utf-8"))
    resp = _request(base, "POST", f"/sessions/{session_id}/edit",
                    {"action": "commit", "base_version": base_version, "ops": ops})
    click.echo(json.dumps(resp.json(), indent=2))


@session.command("graph")
@click.argument("session_id")
@click.option("--version", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_obj
def session_graph(base: str, session_id: str, version: int | None, out: str | None) -> None:
    path = f"/sessions/{session_id}/graph"
    if version is not None:
        path += f"?version={version}"
    resp = _request(base, "GET", path)
    if out:
        Path(out).write_bytes(resp.content)
    else:
        click.echo(resp.text, nl=False)


@session.command("query")
@click.argument("session_id")
@click.option("--target", required=True)
@click.option("--do", "do_", multiple=True)
@click.option("--given", multiple=True)
@click.option("--counterfactual", "cf", is_flag=True)
@click.pass_obj
def session_query(base: str, session_id: str, target: str, do_: tuple[str, ...],
                  given: tuple[str, ...], cf: bool) -> None:
    body = {
        "kind": "counterfactual" if cf else "query",
        "target": target,
        "do": _parse_assignments(do_, "--do"),
        "given": _parse_assignments(given, "--given"),
    }
    resp = _request(base, "POST", f"/sessions/{session_id}/query", body)
    click.echo(json.dumps(resp.json(), indent=2))


@session.command("execute")
@click.argument("session_id")
@click.option("--trials", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--force", multiple=True)
@click.pass_obj
def session_execute(base: str, session_id: str, trials: int, seed: int,
                    force: tuple[str, ...]) -> None:
    body = {"trials": trials, "seed": seed, "forced": _parse_assignments(force, "--force")}
    resp = _request(base, "POST", f"/sessions/{session_id}/execute", body)
    click.echo(json.dumps(resp.json(), indent=2))


@session.command("respond")
@click.argument("session_id")
@click.option("--abort", is_flag=True, help="Stop the paused batch instead of continuing.")
@click.pass_obj
def session_respond(base: str, session_id: str, abort: bool) -> None:
    resp = _request(base, "POST", f"/sessions/{session_id}/respond",
                    {"continue": not abort})
    click.echo(json.dumps(resp.json(), indent=2))


@session.command("events")
@click.argument("session_id")
@click.option("--from-seq", default=0, show_default=True)
@click.pass_obj
def session_events(base: str, session_id: str, from_seq: int) -> None:
    resp = _request(base, "GET", f"/sessions/{session_id}/events?from_seq={from_seq}")
    click.echo(json.dumps(resp.json(), indent=2))


if __name__ == "__main__":
    main()
