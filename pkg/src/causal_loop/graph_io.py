"""Graph file format (`.cg.json`): canonical JSON load/save.

Structural problems (wrong types, missing keys) raise `GraphFileError` with
the path of the first offense. Semantic problems (cycles, bad CPTs, dangling
edges) load fine and are reported by `CausalGraph.validate()` instead, so a
broken document can still be inspected.

The writer is canonical: fixed key order, mechanisms/layout sorted by node,
rows sorted by parent value index. Unknown top-level keys are preserved and
emitted after the known ones in sorted order.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

from .errors import GraphFileError
from .graph import CausalGraph, Edge, Mechanism, Variable, normalize_row, ROW_SUM_TOL

KNOWN_KEYS = ("version", "variables", "edges", "mechanisms", "layout")


def _expect(cond: bool, path: str, reason: str) -> None:
    if not cond:
        raise GraphFileError(path, reason)


def graph_from_dict(doc: Any, path: str = "$") -> CausalGraph:
    _expect(isinstance(doc, dict), path, "document must be a JSON object")
    version = doc.get("version", 0)
    _expect(isinstance(version, int) and not isinstance(version, bool),
            f"{path}.version", "must be an integer")

    variables: list[Variable] = []
    raw_vars = doc.get("variables", [])
    _expect(isinstance(raw_vars, list), f"{path}.variables", "must be a list")
    for i, rv in enumerate(raw_vars):
        vp = f"{path}.variables[{i}]"
        _expect(isinstance(rv, dict), vp, "must be an object")
        _expect(isinstance(rv.get("id"), str), f"{vp}.id", "must be a string")
        dom = rv.get("domain")
        _expect(isinstance(dom, list) and all(isinstance(x, str) for x in dom),
                f"{vp}.domain", "must be a list of strings")
        note = rv.get("note", "")
        _expect(isinstance(note, str), f"{vp}.note", "must be a string")
        prom = rv.get("prominence", 0.5)
        _expect(isinstance(prom, (int, float)) and not isinstance(prom, bool),
                f"{vp}.prominence", "must be a number")
        variables.append(Variable(id=rv["id"], domain=tuple(dom), note=note,
                                  prominence=float(prom)))

    edges: list[Edge] = []
    raw_edges = doc.get("edges", [])
    _expect(isinstance(raw_edges, list), f"{path}.edges", "must be a list")
    for i, re_ in enumerate(raw_edges):
        ep = f"{path}.edges[{i}]"
        _expect(isinstance(re_, dict), ep, "must be an object")
        _expect(isinstance(re_.get("src"), str), f"{ep}.src", "must be a string")
        _expect(isinstance(re_.get("dst"), str), f"{ep}.dst", "must be a string")
        strength = re_.get("strength", 0.5)
        _expect(isinstance(strength, (int, float)) and not isinstance(strength, bool),
                f"{ep}.strength", "must be a number")
        edges.append(Edge(src=re_["src"], dst=re_["dst"], strength=float(strength)))

    mechanisms: dict[str, Mechanism] = {}
    raw_mechs = doc.get("mechanisms", {})
    _expect(isinstance(raw_mechs, dict), f"{path}.mechanisms", "must be an object")
    for node, rm in raw_mechs.items():
        mp = f"{path}.mechanisms.{node}"
        _expect(isinstance(rm, dict), mp, "must be an object")
        rows = rm.get("rows")
        _expect(isinstance(rows, list), f"{mp}.rows", "must be a list")
        parsed_rows: list[dict[str, Any]] = []
        for j, row in enumerate(rows):
            rp = f"{mp}.rows[{j}]"
            _expect(isinstance(row, dict), rp, "must be an object")
            given = row.get("given", {})
            _expect(isinstance(given, dict) and all(isinstance(k, str) and isinstance(v, str)
                                                    for k, v in given.items()),
                    f"{rp}.given", "must map parent names to values")
            p = row.get("p")
            _expect(isinstance(p, list) and p and all(isinstance(x, (int, float)) and
                                                      not isinstance(x, bool) for x in p),
                    f"{rp}.p", "must be a non-empty list of numbers")
            pvec = [float(x) for x in p]
            # Re-normalize decimal round-trip noise; out-of-tolerance rows are
            # kept raw so validate() can flag them.
            if pvec and abs(sum(pvec) - 1.0) <= ROW_SUM_TOL and all(x >= 0 for x in pvec):
                pvec = list(normalize_row(pvec))
            parsed_rows.append({"given": given, "p": pvec})
        try:
            mechanisms[node] = Mechanism.from_rows(node, parsed_rows)
        except Exception as exc:  # row-key disagreements within one mechanism
            raise GraphFileError(f"{mp}.rows", str(exc)) from None

    layout: dict[str, tuple[float, float]] = {}
    raw_layout = doc.get("layout", {})
    _expect(isinstance(raw_layout, dict), f"{path}.layout", "must be an object")
    for node, pos in raw_layout.items():
        lp = f"{path}.layout.{node}"
        _expect(isinstance(pos, list) and len(pos) == 2 and
                all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pos),
                lp, "must be a [x, y] pair")
        layout[node] = (float(pos[0]), float(pos[1]))

    extras = {k: v for k, v in doc.items() if k not in KNOWN_KEYS}
    return CausalGraph(
        version=version, variables=tuple(variables), edges=tuple(edges),
        mechanisms=mechanisms, layout=layout, extras=extras,
    )


def loads_graph(text: str | bytes) -> CausalGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFileError("$", f"invalid JSON: {exc}") from None
    return graph_from_dict(doc)


def load_graph(path: str | Path) -> CausalGraph:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise GraphFileError(str(p), f"cannot read file: {exc}") from None
    return loads_graph(text)


def graph_to_dict(graph: CausalGraph) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "version": graph.version,
        "variables": [
            {"id": v.id, "domain": list(v.domain), "note": v.note, "prominence": v.prominence}
            for v in graph.variables
        ],
        "edges": [
            {"src": e.src, "dst": e.dst, "strength": e.strength} for e in graph.edges
        ],
        "mechanisms": {
            node: {"rows": _sorted_rows(graph, graph.mechanisms[node])}
            for node in sorted(graph.mechanisms)
        },
        "layout": {node: list(graph.layout[node]) for node in sorted(graph.layout)},
    }
    for key in sorted(graph.extras):
        doc[key] = graph.extras[key]
    return doc


def _sorted_rows(graph: CausalGraph, mech: Mechanism) -> list[dict[str, Any]]:
    def sort_key(item: tuple[tuple[str, ...], tuple[float, ...]]):
        key = item[0]
        indices = []
        for parent, value in zip(mech.parents, key):
            if graph.has_variable(parent) and value in graph.domain(parent):
                indices.append(graph.domain(parent).index(value))
            else:
                indices.append(-1)
        return (tuple(indices), key)

    return [
        {"given": {p: v for p, v in sorted(zip(mech.parents, key))}, "p": list(pvec)}
        for key, pvec in sorted(mech.table.items(), key=sort_key)
    ]


def dumps_graph(graph: CausalGraph) -> str:
    return json.dumps(graph_to_dict(graph), ensure_ascii=False, indent=2) + "\n"


def save_graph(graph: CausalGraph, path: str | Path) -> None:
    Path(path).write_text(dumps_graph(graph), encoding="utf-8")


def graph_hash(graph: CausalGraph) -> str:
    """SHA-256 of the canonical serialization."""
    return hashlib.sha256(dumps_graph(graph).encode("utf-8")).hexdigest()
