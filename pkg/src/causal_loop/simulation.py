"""Simulated pick-and-place world driven by a hidden ground-truth causal graph.

Each trial samples a world from the ground truth (optionally mutilated by the
plan's forced attribute values), picks a gripper mode by asking the operator's
graph which mode it predicts for the observed object attributes, executes that
mode, and samples the outcome. The whole executed system is itself a causal
graph (ground truth with the decision node's mechanism replaced by the derived
policy), which makes exact success rates computable by enumeration.
"""

from __future__ import annotations

import csv
import io
import json
import weakref
from dataclasses import dataclass, field
from importlib import resources
from itertools import product
from pathlib import Path
from statistics import NormalDist
from typing import Any, Mapping

import numpy as np

from .errors import (
    InterventionOutOfDomain,
    InvalidGraph,
    InvalidPlan,
    InvalidScenario,
    NotFound,
)
from .graph import CausalGraph, Mechanism
from .graph_io import graph_from_dict, load_graph
from .inference import (
    Intervention,
    Query,
    ZeroProbabilityEvidence,
    _compile_sampler,
    apply_intervention,
    query,
)

BUNDLED = ("pnp10", "nav3")

FAILURE_REASONS = ("slip", "no-grasp", "plan-infeasible")


@dataclass(frozen=True)
class Scenario:
    """A task world: hidden ground truth plus what the operator may observe."""

    name: str
    ground_truth: CausalGraph
    exposed: tuple[str, ...]
    attributes: tuple[str, ...]          # object-attribute variables fed to the policy
    catalog: tuple[dict[str, Any], ...]  # object types with attribute distributions
    decision_variable: str = "Gripper"
    success_variable: str = "Success"
    type_variable: str | None = "Type"

    def require_executable(self) -> None:
        gt = self.ground_truth
        if not gt.has_variable(self.success_variable):
            raise InvalidScenario(
                f"scenario {self.name!r} has no {self.success_variable!r} variable; "
                "it supports queries but not execution"
            )
        if len(gt.domain(self.success_variable)) != 2:
            raise InvalidScenario(
                f"{self.success_variable} must be binary (negative label first)"
            )
        if not gt.has_variable(self.decision_variable):
            raise InvalidScenario(
                f"scenario {self.name!r} has no decision variable "
                f"{self.decision_variable!r}"
            )

    @property
    def success_value(self) -> str:
        return self.ground_truth.domain(self.success_variable)[1]


@dataclass(frozen=True)
class Plan:
    """Per-batch execution settings."""

    trials: int
    seed: int
    forced: dict[str, str] = field(default_factory=dict)

    def check(self, scenario: Scenario) -> None:
        if self.trials < 1:
            raise InvalidPlan(f"trial count must be >= 1, got {self.trials}")
        gt = scenario.ground_truth
        for node, value in self.forced.items():
            if not gt.has_variable(node):
                raise InterventionOutOfDomain(f"forced value names unknown variable {node!r}")
            if value not in gt.domain(node):
                raise InterventionOutOfDomain(f"forced {node}={value!r} not in domain")

    def to_dict(self) -> dict[str, Any]:
        return {"trials": self.trials, "seed": self.seed, "forced": dict(self.forced)}

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Plan":
        return cls(
            trials=int(doc.get("trials", 1)),
            seed=int(doc.get("seed", 0)),
            forced=dict(doc.get("forced", {})),
        )


@dataclass(frozen=True)
class TrialResult:
    index: int
    world: dict[str, str]        # exposed variables only
    gripper_mode: str
    success: bool
    failure_reason: str | None   # present iff success is False

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "world": dict(self.world),
            "gripper_mode": self.gripper_mode,
            "success": self.success,
            "failure_reason": self.failure_reason,
        }


@dataclass(frozen=True)
class BatchSummary:
    n: int
    successes: int
    success_rate: float
    per_type: dict[str, dict[str, Any]]
    seed: int
    aborted: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "per_type": self.per_type,
            "seed": self.seed,
            "aborted": self.aborted,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"


# --- scenario loading --------------------------------------------------------

def _bundled_path(name: str):
    return resources.files("causal_loop.scenarios").joinpath(f"{name}.cg.json")


def load_scenario(name_or_path: str | Path) -> Scenario:
    """Load a bundled scenario (`pnp10`, `nav3`) or a scenario file."""
    name = str(name_or_path)
    if name in BUNDLED:
        with resources.as_file(_bundled_path(name)) as p:
            graph = load_graph(p)
        return _scenario_from_graph(name, graph)
    p = Path(name)
    if not p.exists():
        raise NotFound(f"no bundled scenario or file named {name!r}")
    graph = load_graph(p)
    return _scenario_from_graph(p.stem.replace(".cg", ""), graph)


def _scenario_from_graph(name: str, graph: CausalGraph) -> Scenario:
    meta = graph.extras.get("scenario")
    if not isinstance(meta, dict):
        raise InvalidScenario(f"$.scenario: missing scenario object in {name!r}")
    report = graph.validate()
    if not report.is_valid:
        first = report.errors()[0]
        raise InvalidScenario(f"$.{first.subject}: {first.message}")

    exposed = meta.get("exposed", [])
    if not isinstance(exposed, list) or not all(isinstance(x, str) for x in exposed):
        raise InvalidScenario("$.scenario.exposed: must be a list of variable ids")
    for node in exposed:
        if not graph.has_variable(node):
            raise InvalidScenario(f"$.scenario.exposed: unknown variable {node!r}")

    attributes = meta.get("attributes", [])
    if not isinstance(attributes, list) or not all(isinstance(x, str) for x in attributes):
        raise InvalidScenario("$.scenario.attributes: must be a list of variable ids")
    for node in attributes:
        if not graph.has_variable(node):
            raise InvalidScenario(f"$.scenario.attributes: unknown variable {node!r}")

    decision = meta.get("decision_variable", "Gripper")
    success = meta.get("success_variable", "Success")
    type_var = meta.get("type_variable", "Type" if graph.has_variable("Type") else None)

    catalog = meta.get("catalog", [])
    if not isinstance(catalog, list):
        raise InvalidScenario("$.scenario.catalog: must be a list")
    if type_var is not None and graph.has_variable(type_var):
        type_domain = graph.domain(type_var)
        for i, entry in enumerate(catalog):
            cp = f"$.scenario.catalog[{i}]"
            if not isinstance(entry, dict) or "type" not in entry:
                raise InvalidScenario(f"{cp}: must be an object with a 'type' key")
            if entry["type"] not in type_domain:
                raise InvalidScenario(f"{cp}.type: {entry['type']!r} not in {type_var}'s domain")
            for attr, dist in entry.get("attributes", {}).items():
                ap = f"{cp}.attributes.{attr}"
                if not graph.has_variable(attr):
                    raise InvalidScenario(f"{ap}: unknown variable")
                if len(dist) != len(graph.domain(attr)):
                    raise InvalidScenario(f"{ap}: length does not match domain")
                if graph.parent_ids(attr) == (type_var,):
                    row = graph.mechanisms[attr].table[(entry["type"],)]
                    if any(abs(a - b) > 1e-9 for a, b in zip(row, dist)):
                        raise InvalidScenario(f"{ap}: disagrees with the graph's CPT")

    # executed-system surgery must stay acyclic
    if graph.has_variable(decision):
        descendants = _descendants(graph, decision)
        bad = [a for a in attributes if a in descendants]
        if bad:
            raise InvalidScenario(
                f"$.scenario.attributes: {bad} are descendants of {decision!r}"
            )

    return Scenario(
        name=name, ground_truth=graph, exposed=tuple(exposed),
        attributes=tuple(attributes), catalog=tuple(catalog),
        decision_variable=decision, success_variable=success, type_variable=type_var,
    )


def _descendants(graph: CausalGraph, node: str) -> set[str]:
    seen: set[str] = set()
    stack = list(graph.children_ids(node))
    while stack:
        cur = stack.pop()
        if cur not in seen:
            seen.add(cur)
            stack.extend(graph.children_ids(cur))
    return seen


# --- policy and executed system ----------------------------------------------

def build_policy(scenario: Scenario, operator_graph: CausalGraph) -> dict[tuple[str, ...], str]:
    """Gripper mode per object-attribute combination, argmax of the operator
    graph's prediction for the decision node; ties broken by domain order."""
    operator_graph.require_valid()
    gt = scenario.ground_truth
    decision = scenario.decision_variable
    if not operator_graph.has_variable(decision):
        raise InvalidGraph(f"operator graph has no {decision!r} variable")
    op_modes = operator_graph.domain(decision)
    gt_modes = gt.domain(decision)
    for mode in op_modes:
        if mode not in gt_modes:
            raise InvalidGraph(f"operator mode {mode!r} is not executable in this world")

    cache: dict[tuple[tuple[str, str], ...], str] = {}
    policy: dict[tuple[str, ...], str] = {}
    for combo in product(*(gt.domain(a) for a in scenario.attributes)):
        evidence = {
            a: v for a, v in zip(scenario.attributes, combo)
            if operator_graph.has_variable(a) and v in operator_graph.domain(a)
        }
        key = tuple(sorted(evidence.items()))
        if key not in cache:
            try:
                dist = query(operator_graph, Query(target=decision, evidence=evidence))
            except ZeroProbabilityEvidence:
                dist = query(operator_graph, Query(target=decision))
            best = max(range(len(op_modes)), key=lambda i: (dist.p[i], -i))
            cache[key] = op_modes[best]
        policy[combo] = cache[key]
    return policy


# Policy derivation enumerates one query per attribute combination, which is
# the expensive part of a batch; memoize per (ground truth, operator graph).
_executed_cache: "weakref.WeakKeyDictionary[CausalGraph, weakref.WeakKeyDictionary]" = (
    weakref.WeakKeyDictionary()
)


def executed_graph(
    scenario: Scenario,
    operator_graph: CausalGraph,
    forced: Mapping[str, str] | None = None,
) -> CausalGraph:
    """Ground truth with the decision node's mechanism replaced by the policy."""
    scenario.require_executable()
    gt = scenario.ground_truth
    per_operator = _executed_cache.setdefault(gt, weakref.WeakKeyDictionary())
    base = per_operator.get(operator_graph)
    if base is None:
        base = _build_executed_graph(scenario, operator_graph)
        per_operator[operator_graph] = base
    if forced:
        return apply_intervention(base, Intervention(dict(forced)))
    return base


def _build_executed_graph(scenario: Scenario, operator_graph: CausalGraph) -> CausalGraph:
    gt = scenario.ground_truth
    decision = scenario.decision_variable
    policy = build_policy(scenario, operator_graph)
    g = gt
    for e in gt.edges:
        if e.dst == decision:
            g = g.remove_element(e.id)
    for a in scenario.attributes:
        if not g.has_edge(a, decision):
            g = g.add_edge(a, decision)
    modes = gt.domain(decision)
    rows = []
    for combo, mode in policy.items():
        rows.append({
            "given": dict(zip(scenario.attributes, combo)),
            "p": [1.0 if m == mode else 0.0 for m in modes],
        })
    return g.set_mechanism(Mechanism.from_rows(decision, rows))


def expected_success_rate(
    scenario: Scenario,
    operator_graph: CausalGraph,
    forced: Mapping[str, str] | None = None,
) -> float:
    """Exact P(success) of the executed system, by enumeration."""
    g = executed_graph(scenario, operator_graph, forced)
    dist = query(g, Query(target=scenario.success_variable))
    return dist[scenario.success_value]


# --- trial execution ---------------------------------------------------------

class _Executor:
    """Compiled sampler over the executed graph, shared across a batch."""

    def __init__(self, scenario: Scenario, plan: Plan, operator_graph: CausalGraph):
        plan.check(scenario)
        scenario.require_executable()
        self.scenario = scenario
        self.plan = plan
        self.graph = executed_graph(scenario, operator_graph, plan.forced)
        self.order, self.nodes = _compile_sampler(self.graph)
        self.domains = {name: self.graph.domain(name) for name in self.order}
        self.pos = {name: i for i, name in enumerate(self.order)}
        self.exposed = [v for v in scenario.exposed if v in self.pos]

    def run(self, trial_seed: int) -> TrialResult:
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((self.plan.seed, trial_seed))
        ))
        values: list[int] = []
        for node in self.nodes:
            row = 0
            for ppos, stride in zip(node.parent_positions, node.strides):
                row += values[ppos] * stride
            cum = node.cum[row]
            u = rng.random()
            v = int(np.searchsorted(cum, u, side="right"))
            values.append(min(v, node.domain_size - 1))
        world_all = {
            name: self.domains[name][values[i]] for i, name in enumerate(self.order)
        }
        success = world_all[self.scenario.success_variable] == self.scenario.success_value
        mode = world_all[self.scenario.decision_variable]
        world = {name: world_all[name] for name in self.exposed}
        reason = None if success else _failure_reason(world_all)
        return TrialResult(
            index=trial_seed, world=world, gripper_mode=mode,
            success=success, failure_reason=reason,
        )


def _failure_reason(world: Mapping[str, str]) -> str:
    """Deterministic failure labeling from the sampled world."""
    if world.get("Target") == "off_pose":
        return "plan-infeasible"
    if world.get("Weight") == "heavy" or world.get("Texture") == "smooth":
        return "slip"
    return "no-grasp"


def run_trial(
    scenario: Scenario,
    plan: Plan,
    operator_graph: CausalGraph,
    trial_seed: int,
) -> TrialResult:
    return _Executor(scenario, plan, operator_graph).run(trial_seed)


def summarize(scenario: Scenario, plan: Plan, results: list[TrialResult],
              aborted: bool = False) -> BatchSummary:
    successes = sum(1 for r in results if r.success)
    per_type: dict[str, dict[str, Any]] = {}
    tvar = scenario.type_variable
    if tvar is not None:
        for r in results:
            t = r.world.get(tvar)
            if t is None:
                continue
            slot = per_type.setdefault(t, {"n": 0, "successes": 0})
            slot["n"] += 1
            slot["successes"] += r.success
        for slot in per_type.values():
            slot["rate"] = slot["successes"] / slot["n"]
    n = len(results)
    return BatchSummary(
        n=n, successes=successes,
        success_rate=successes / n if n else 0.0,
        per_type=dict(sorted(per_type.items())),
        seed=plan.seed, aborted=aborted,
    )


def run_batch(scenario: Scenario, plan: Plan, operator_graph: CausalGraph) -> BatchSummary:
    ex = _Executor(scenario, plan, operator_graph)
    results = [ex.run(i) for i in range(plan.trials)]
    return summarize(scenario, plan, results)


# --- intervention benchmark --------------------------------------------------

@dataclass(frozen=True)
class Arm:
    arm: str            # "control" or the intervened attribute id
    value: str          # forced value; "" for control
    n: int
    successes: int
    rate: float
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "arm": self.arm, "value": self.value, "n": self.n,
            "successes": self.successes, "rate": self.rate,
            "ci_low": self.ci_low, "ci_high": self.ci_high,
        }


@dataclass(frozen=True)
class BenchReport:
    scenario: str
    target: str
    arms: tuple[Arm, ...]
    max_diff: dict[str, Any]   # worst pair with a simultaneous 95% CI
    seed: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "target": self.target,
            "arms": [a.to_dict() for a in self.arms],
            "max_diff": self.max_diff,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["arm", "value", "n", "successes", "rate", "ci_low", "ci_high"])
        for a in self.arms:
            writer.writerow([
                a.arm, a.value, a.n, a.successes,
                f"{a.rate:.6f}", f"{a.ci_low:.6f}", f"{a.ci_high:.6f}",
            ])
        return buf.getvalue()


def _wilson(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    phat = successes / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * ((phat * (1 - phat) / n + z * z / (4 * n * n)) ** 0.5) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def _arm_seed(seed: int, arm_index: int) -> int:
    return int(np.random.SeedSequence((seed, arm_index)).generate_state(1, np.uint64)[0])


def bench_intervention(
    scenario: Scenario,
    operator_graph: CausalGraph,
    target_attribute: str,
    n_per_arm: int,
    seed: int = 0,
    alpha: float = 0.05,
) -> BenchReport:
    """One batch per forced value of `target_attribute` plus a control batch.

    Per-arm rates carry Wilson 95% intervals. The maximum pairwise rate
    difference carries a Bonferroni-adjusted (simultaneous) normal CI so that
    "every pairwise CI covers 0" holds at the stated level under a null effect.
    """
    if target_attribute not in scenario.exposed:
        raise InvalidPlan(f"{target_attribute!r} is not an exposed variable")
    if not scenario.ground_truth.has_variable(target_attribute):
        raise InvalidPlan(f"unknown attribute {target_attribute!r}")
    if n_per_arm < 1:
        raise InvalidPlan("n per arm must be >= 1")

    arms: list[Arm] = []
    plans = [("control", "", {})]
    for value in scenario.ground_truth.domain(target_attribute):
        plans.append((target_attribute, value, {target_attribute: value}))
    for i, (arm_name, value, forced) in enumerate(plans):
        plan = Plan(trials=n_per_arm, seed=_arm_seed(seed, i), forced=forced)
        batch = run_batch(scenario, plan, operator_graph)
        lo, hi = _wilson(batch.successes, batch.n)
        arms.append(Arm(
            arm=arm_name, value=value, n=batch.n, successes=batch.successes,
            rate=batch.success_rate, ci_low=lo, ci_high=hi,
        ))

    pairs = [(i, j) for i in range(len(arms)) for j in range(i + 1, len(arms))]
    z = NormalDist().inv_cdf(1 - alpha / (2 * len(pairs)))
    worst: dict[str, Any] | None = None
    for i, j in pairs:
        a, b = arms[i], arms[j]
        diff = a.rate - b.rate
        se = (a.rate * (1 - a.rate) / a.n + b.rate * (1 - b.rate) / b.n) ** 0.5
        entry = {
            "a": f"{a.arm}={a.value}" if a.value else a.arm,
            "b": f"{b.arm}={b.value}" if b.value else b.arm,
            "diff": diff,
            "ci_low": diff - z * se,
            "ci_high": diff + z * se,
        }
        if worst is None or abs(diff) > abs(worst["diff"]):
            worst = entry
    assert worst is not None
    return BenchReport(
        scenario=scenario.name, target=target_attribute,
        arms=tuple(arms), max_diff=worst, seed=seed,
    )
