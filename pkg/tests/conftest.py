import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from causal_loop.graph import CausalGraph, Mechanism, Variable
from causal_loop.simulation import load_scenario

DATA_DIR = Path(__file__).parent / "data"


def build_nav3() -> CausalGraph:
    """The battery/terrain/velocity fixture, built through the public ops."""
    g = CausalGraph()
    g = g.add_node(Variable("B", ("low", "full")))
    g = g.add_node(Variable("T", ("smooth", "rough")))
    g = g.add_node(Variable("V", ("slow", "medium", "fast")))
    g = g.add_edge("B", "V").add_edge("T", "V")
    g = g.set_mechanism(Mechanism.from_rows("B", [{"given": {}, "p": [0.3, 0.7]}]))
    g = g.set_mechanism(Mechanism.from_rows("T", [{"given": {}, "p": [0.6, 0.4]}]))
    g = g.set_mechanism(Mechanism.from_rows("V", [
        {"given": {"B": "low", "T": "smooth"}, "p": [0.5, 0.35, 0.15]},
        {"given": {"B": "low", "T": "rough"}, "p": [0.75, 0.2, 0.05]},
        {"given": {"B": "full", "T": "smooth"}, "p": [0.1, 0.3, 0.6]},
        {"given": {"B": "full", "T": "rough"}, "p": [0.3, 0.45, 0.25]},
    ]))
    return g


FIG3_EDGES = [
    ("Type", "Size"), ("Type", "Weight"), ("Type", "Texture"), ("Type", "Rigidity"),
    ("Size", "Gripper"), ("Weight", "Gripper"), ("Texture", "Gripper"),
    ("Rigidity", "Gripper"), ("Robot", "Gripper"), ("Gripper", "Target"),
    ("Target", "Success"), ("Goal", "Success"),
]

PNP_VARIABLES = ["Robot", "Gripper", "Target", "Goal", "Type", "Weight",
                 "Size", "Texture", "Rigidity", "Success"]


def random_graph(rng: np.random.Generator, max_nodes: int = 6,
                 max_domain: int = 3, edge_prob: float = 0.45) -> CausalGraph:
    """Random small DAG with random CPTs, fully valid."""
    n = int(rng.integers(2, max_nodes + 1))
    names = [f"N{i}" for i in range(n)]
    g = CausalGraph()
    for name in names:
        k = int(rng.integers(2, max_domain + 1))
        g = g.add_node(Variable(name, tuple(f"v{j}" for j in range(k))))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                g = g.add_edge(names[i], names[j])
    for name in names:
        g = fill_random_cpt(g, name, rng)
    return g


def fill_random_cpt(g: CausalGraph, node: str, rng: np.random.Generator) -> CausalGraph:
    from itertools import product as _product

    parents = g.parent_ids(node)
    k = len(g.domain(node))
    rows = []
    for combo in _product(*(g.domain(p) for p in parents)):
        raw = rng.random(k) + 0.05
        p = (raw / raw.sum()).tolist()
        rows.append({"given": dict(zip(parents, combo)), "p": p})
    return g.set_mechanism(Mechanism.from_rows(node, rows))


@pytest.fixture
def nav3_graph() -> CausalGraph:
    return build_nav3()


@pytest.fixture(scope="session")
def nav3_scenario():
    return load_scenario("nav3")


@pytest.fixture(scope="session")
def pnp10_scenario():
    return load_scenario("pnp10")


@pytest.fixture
def failbot_path() -> Path:
    """Scenario whose first-sampled object always fails (deterministic chain)."""
    return DATA_DIR / "failbot.cg.json"
