import json

import pytest

from causal_loop.errors import GraphFileError
from causal_loop.graph_io import (
    dumps_graph,
    graph_from_dict,
    graph_hash,
    load_graph,
    loads_graph,
    save_graph,
)

from conftest import build_nav3

SPEC_SAMPLE = {
    "version": 1,
    "variables": [
        {"id": "Type", "domain": ["drill", "box"], "note": "", "prominence": 0.5},
        {"id": "Weight", "domain": ["light", "heavy"], "note": "", "prominence": 0.5},
    ],
    "edges": [{"src": "Type", "dst": "Weight", "strength": 0.8}],
    "mechanisms": {
        "Type": {"rows": [{"given": {}, "p": [0.5, 0.5]}]},
        "Weight": {"rows": [
            {"given": {"Type": "drill"}, "p": [0.2, 0.8]},
            {"given": {"Type": "box"}, "p": [0.7, 0.3]},
        ]},
    },
    "layout": {"Weight": [120.0, 340.0]},
}


def test_parse_spec_shaped_document():
    g = graph_from_dict(SPEC_SAMPLE)
    assert g.version == 1
    assert [v.id for v in g.variables] == ["Type", "Weight"]
    assert g.edges[0].strength == 0.8
    assert g.mechanisms["Weight"].row({"Type": "drill"}) == (0.2, 0.8)
    assert g.layout["Weight"] == (120.0, 340.0)
    assert g.validate().is_valid


def test_round_trip_byte_stable(tmp_path):
    g = build_nav3()
    first = dumps_graph(g)
    second = dumps_graph(loads_graph(first))
    third = dumps_graph(loads_graph(second))
    assert first == second == third


def test_round_trip_byte_stable_from_decimal_noise():
    doc = dict(SPEC_SAMPLE)
    doc = json.loads(json.dumps(doc))
    doc["mechanisms"]["Type"]["rows"][0]["p"] = [0.1 + 0.2, 0.7]  # 0.30000000000000004
    one = dumps_graph(graph_from_dict(doc))
    two = dumps_graph(loads_graph(one))
    assert one == two


def test_unknown_top_level_keys_preserved():
    doc = dict(SPEC_SAMPLE)
    doc["scenario"] = {"exposed": ["Type"]}
    doc["custom"] = [1, 2, 3]
    text = dumps_graph(graph_from_dict(doc))
    reloaded = json.loads(text)
    assert reloaded["scenario"] == {"exposed": ["Type"]}
    assert reloaded["custom"] == [1, 2, 3]


def test_bundled_files_round_trip(tmp_path):
    from importlib import resources
    for name in ("nav3", "pnp10"):
        with resources.as_file(
                resources.files("causal_loop.scenarios").joinpath(f"{name}.cg.json")) as p:
            g = load_graph(p)
            one = dumps_graph(g)
            assert one == dumps_graph(loads_graph(one))
            assert p.read_text(encoding="utf-8") == one  # shipped files are canonical


def test_save_and_load(tmp_path):
    g = build_nav3()
    path = tmp_path / "nav.cg.json"
    save_graph(g, path)
    g2 = load_graph(path)
    assert dumps_graph(g2) == dumps_graph(g)
    assert graph_hash(g2) == graph_hash(g)


def test_parse_errors_carry_path():
    with pytest.raises(GraphFileError) as exc:
        loads_graph("{not json")
    assert exc.value.path == "$"

    with pytest.raises(GraphFileError) as exc:
        graph_from_dict({"version": 1, "variables": [{"id": 3, "domain": ["a", "b"]}]})
    assert exc.value.path == "$.variables[0].id"

    with pytest.raises(GraphFileError) as exc:
        graph_from_dict({"version": "x"})
    assert exc.value.path == "$.version"

    with pytest.raises(GraphFileError) as exc:
        graph_from_dict({"version": 1, "mechanisms": {"X": {"rows": [{"given": {}, "p": []}]}}})
    assert "rows[0].p" in exc.value.path

    with pytest.raises(GraphFileError) as exc:
        load_graph("/nonexistent/file.cg.json")
    assert "cannot read" in exc.value.detail


def test_semantic_problems_load_but_fail_validation():
    # cycle in the file
    doc = {
        "version": 1,
        "variables": [
            {"id": "A", "domain": ["0", "1"]},
            {"id": "B", "domain": ["0", "1"]},
        ],
        "edges": [{"src": "A", "dst": "B"}, {"src": "B", "dst": "A"}],
        "mechanisms": {},
        "layout": {},
    }
    g = graph_from_dict(doc)
    report = g.validate()
    assert not report.is_valid
    assert any("cycle" in i.message for i in report.errors())

    # dangling edge endpoint
    doc2 = {
        "version": 1,
        "variables": [{"id": "A", "domain": ["0", "1"]}],
        "edges": [{"src": "A", "dst": "Ghost"}],
    }
    report2 = graph_from_dict(doc2).validate()
    assert any("unknown endpoint" in i.message for i in report2.errors())

    # bad row sum is a validation issue, not a parse failure
    doc3 = {
        "version": 1,
        "variables": [{"id": "A", "domain": ["0", "1"]}],
        "edges": [],
        "mechanisms": {"A": {"rows": [{"given": {}, "p": [0.5, 0.4]}]}},
    }
    report3 = graph_from_dict(doc3).validate()
    assert any("sums to" in i.message for i in report3.errors())


def test_rows_in_tolerance_are_renormalized():
    doc = {
        "version": 1,
        "variables": [{"id": "A", "domain": ["0", "1"]}],
        "edges": [],
        "mechanisms": {"A": {"rows": [{"given": {}, "p": [0.5, 0.5000000001]}]}},
    }
    g = graph_from_dict(doc)
    assert g.validate().is_valid
    assert sum(g.mechanisms["A"].table[()]) == pytest.approx(1.0, abs=1e-12)
