"""Observational, interventional, and counterfactual queries on valid graphs.

Exact answers come from enumeration over full assignments (materialized as a
joint probability tensor), bounded by `ENUMERATION_LIMIT`. Counterfactuals use
abduction-action-prediction over the explicit inverse-CDF noise representation:
each node's noise interval [0,1) is partitioned into bins on which every CPT
row is constant, the posterior over joint bins given evidence is computed, and
each surviving bin configuration is pushed through the mutilated graph.

A Monte Carlo sampler (ancestral sampling, seeded PCG64) provides an
independent cross-check for all of the above.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from dataclasses import replace as _replace
from itertools import product
from typing import Any, Callable, Iterator, Mapping

import numpy as np

from .errors import (
    Cancelled,
    InvalidArgument,
    InvalidQuery,
    ScaleLimit,
    UnknownNode,
    ValueNotInDomain,
    ZeroProbabilityEvidence,
)
from .graph import CausalGraph, Mechanism

ENUMERATION_LIMIT = 2 ** 22
NOISE_CONFIG_LIMIT = 2 ** 20
MC_ABDUCTION_DRAWS = 100_000

CancelSignal = Callable[[], bool]


def _check_cancel(cancel: CancelSignal | None) -> None:
    if cancel is not None and cancel():
        raise Cancelled("enumeration cancelled by caller")


@dataclass(frozen=True)
class Intervention:
    """A do-set: nodes forced to values by graph surgery."""

    assignments: dict[str, str] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.assignments)

    def check(self, graph: CausalGraph) -> None:
        for node, value in self.assignments.items():
            if not graph.has_variable(node):
                raise UnknownNode(f"do() names unknown variable {node!r}")
            if value not in graph.domain(node):
                raise ValueNotInDomain(f"do({node}={value!r}) not in domain")


@dataclass(frozen=True)
class Query:
    target: str
    evidence: dict[str, str] = field(default_factory=dict)
    interventions: Intervention = field(default_factory=Intervention)

    def __post_init__(self) -> None:
        if self.target in self.interventions.assignments:
            raise InvalidQuery(f"target {self.target!r} cannot also be intervened on")
        overlap = set(self.evidence) & set(self.interventions.assignments)
        if overlap:
            raise InvalidQuery(f"evidence and do-set overlap on {sorted(overlap)}")

    def check(self, graph: CausalGraph) -> None:
        if not graph.has_variable(self.target):
            raise UnknownNode(f"unknown target {self.target!r}")
        for node, value in self.evidence.items():
            if not graph.has_variable(node):
                raise UnknownNode(f"evidence names unknown variable {node!r}")
            if value not in graph.domain(node):
                raise ValueNotInDomain(f"evidence {node}={value!r} not in domain")
        self.interventions.check(graph)


@dataclass(frozen=True)
class Distribution:
    """Normalized probability vector over one variable's domain."""

    variable: str
    domain: tuple[str, ...]
    p: tuple[float, ...]
    meta: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, value: str) -> float:
        return self.p[self.domain.index(value)]

    def to_dict(self) -> dict[str, Any]:
        return {
            "variable": self.variable,
            "domain": list(self.domain),
            "p": list(self.p),
            "meta": self.meta,
        }


class SampleSet:
    """Ancestral samples in columnar form; `rows` materializes dicts."""

    def __init__(self, graph: CausalGraph, n: int, seed: int,
                 columns: dict[str, np.ndarray]):
        self.n = n
        self.seed = seed
        self.variables = tuple(v.id for v in graph.variables)
        self.domains = {v.id: v.domain for v in graph.variables}
        self.columns = columns

    @property
    def rows(self) -> list[dict[str, str]]:
        out = []
        for i in range(self.n):
            out.append({
                name: self.domains[name][self.columns[name][i]]
                for name in self.variables
            })
        return out

    def iter_rows(self) -> Iterator[dict[str, str]]:
        for i in range(self.n):
            yield {name: self.domains[name][self.columns[name][i]]
                   for name in self.variables}

    def frequency(self, variable: str) -> tuple[float, ...]:
        col = self.columns[variable]
        counts = np.bincount(col, minlength=len(self.domains[variable]))
        return tuple(counts / self.n)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (self.n == other.n and self.seed == other.seed
                and self.variables == other.variables
                and all(np.array_equal(self.columns[v], other.columns[v])
                        for v in self.variables))


# --- graph surgery -----------------------------------------------------------

def apply_intervention(graph: CausalGraph, iv: Intervention) -> CausalGraph:
    """Mutilate: cut edges into each intervened node, pin it to a point mass."""
    graph.require_valid()
    iv.check(graph)
    if not iv.assignments:
        return graph
    targets = set(iv.assignments)
    edges = tuple(e for e in graph.edges if e.dst not in targets)
    mechanisms = dict(graph.mechanisms)
    for node, value in iv.assignments.items():
        domain = graph.domain(node)
        p = tuple(1.0 if d == value else 0.0 for d in domain)
        mechanisms[node] = Mechanism(node=node, parents=(), table={(): p})
    return _replace(graph, edges=edges, mechanisms=mechanisms,
                    stale=graph.stale - targets)


# --- exact enumeration -------------------------------------------------------

def _check_scale(graph: CausalGraph) -> None:
    if graph.assignment_count > ENUMERATION_LIMIT:
        raise ScaleLimit(
            f"{graph.assignment_count} full assignments exceed the enumeration "
            f"bound of {ENUMERATION_LIMIT}"
        )


def joint_tensor(graph: CausalGraph, cancel: CancelSignal | None = None) -> np.ndarray:
    """Full joint over all variables, axes in document variable order."""
    graph.require_valid()
    _check_scale(graph)
    names = [v.id for v in graph.variables]
    pos = {n: i for i, n in enumerate(names)}
    sizes = [len(v.domain) for v in graph.variables]
    n = len(names)
    result = np.ones([1] * n if n else [], dtype=np.float64)
    for v in graph.variables:
        _check_cancel(cancel)
        mech = graph.mechanisms[v.id]
        pdims = [len(graph.domain(p)) for p in mech.parents]
        arr = np.empty(pdims + [len(v.domain)], dtype=np.float64)
        for key, p in mech.table.items():
            idx = tuple(graph.domain(par).index(val)
                        for par, val in zip(mech.parents, key))
            arr[idx] = p
        axes_doc = [pos[p] for p in mech.parents] + [pos[v.id]]
        order = sorted(range(len(axes_doc)), key=lambda i: axes_doc[i])
        arr = np.transpose(arr, order)
        shape = [sizes[d] if d in axes_doc else 1 for d in range(n)]
        result = result * arr.reshape(shape)
    _check_cancel(cancel)
    return result


def _marginal_vector(graph: CausalGraph, tensor: np.ndarray, target: str,
                     fixed: Mapping[str, str]) -> np.ndarray:
    names = [v.id for v in graph.variables]
    pos = {n: i for i, n in enumerate(names)}
    idx: list[Any] = [slice(None)] * len(names)
    for node, value in fixed.items():
        vidx = graph.domain(node).index(value)
        idx[pos[node]] = slice(vidx, vidx + 1)
    sub = tensor[tuple(idx)]
    axes = tuple(i for i in range(len(names)) if i != pos[target])
    return sub.sum(axis=axes) if axes else sub


def query(graph: CausalGraph, q: Query, cancel: CancelSignal | None = None) -> Distribution:
    """Exact P(target | evidence, do(...)) by enumeration on the mutilated graph."""
    graph.require_valid()
    q.check(graph)
    mutilated = apply_intervention(graph, q.interventions)
    tensor = joint_tensor(mutilated, cancel)
    fixed = dict(q.evidence)
    fixed.update(q.interventions.assignments)
    target_value = fixed.pop(q.target, None)
    vec = _marginal_vector(mutilated, tensor, q.target, fixed)
    if target_value is not None:
        mask = np.zeros_like(vec)
        vidx = graph.domain(q.target).index(target_value)
        mask[vidx] = vec[vidx]
        vec = mask
    total = float(vec.sum())
    if total <= 0.0:
        raise ZeroProbabilityEvidence(
            f"evidence {q.evidence} has probability 0 under the queried graph"
        )
    p = tuple(float(x) for x in vec / total)
    meta: dict[str, Any] = {"method": "enumeration"}
    if q.interventions:
        meta["do"] = dict(q.interventions.assignments)
    if q.evidence:
        meta["given"] = dict(q.evidence)
    return Distribution(variable=q.target, domain=graph.domain(q.target), p=p, meta=meta)


def adjustment_estimate(
    graph: CausalGraph,
    target: str,
    iv: Intervention,
    adjustment_set: set[str] | frozenset[str],
    cancel: CancelSignal | None = None,
) -> Distribution:
    """Covariate-adjustment estimate of an interventional distribution.

    Sums P(target | do-values-as-evidence, z) * P(z) over assignments z to the
    adjustment set, all computed on the unmutilated graph. Strata with zero
    probability are skipped and flagged; the result is renormalized over the
    included mass.
    """
    graph.require_valid()
    if len(iv.assignments) != 1:
        raise InvalidQuery("adjustment_estimate needs a single-node intervention")
    iv.check(graph)
    if not graph.has_variable(target):
        raise UnknownNode(f"unknown target {target!r}")
    adj = sorted(adjustment_set)
    for node in adj:
        if not graph.has_variable(node):
            raise UnknownNode(f"adjustment set names unknown variable {node!r}")
    forbidden = {target} | set(iv.assignments)
    if forbidden & set(adj):
        raise InvalidQuery("adjustment set must be disjoint from target and do-set")

    tensor = joint_tensor(graph, cancel)
    iv_as_evidence = dict(iv.assignments)
    k = len(graph.domain(target))
    acc = np.zeros(k, dtype=np.float64)
    included_mass = 0.0
    skipped: list[dict[str, str]] = []
    for combo in product(*(graph.domain(a) for a in adj)):
        _check_cancel(cancel)
        stratum = dict(zip(adj, combo))
        pz_vec = _marginal_vector(graph, tensor, target, stratum)
        pz = float(pz_vec.sum())
        if pz <= 0.0:
            skipped.append(stratum)
            continue
        fixed = dict(stratum)
        fixed.update(iv_as_evidence)
        num = _marginal_vector(graph, tensor, target, fixed)
        denom = float(num.sum())
        if denom <= 0.0:
            skipped.append(stratum)
            continue
        acc += (num / denom) * pz
        included_mass += pz
    if included_mass <= 0.0:
        raise ZeroProbabilityEvidence(
            f"every stratum of {adj} is incompatible with {iv_as_evidence}"
        )
    p = tuple(float(x) for x in acc / included_mass)
    meta: dict[str, Any] = {
        "method": "adjustment",
        "adjustment_set": adj,
        "do": dict(iv.assignments),
    }
    if skipped:
        meta["skipped_strata"] = skipped
        meta["included_mass"] = included_mass
        meta["flag"] = "DivisionByZeroStratum"
    return Distribution(variable=target, domain=graph.domain(target), p=p, meta=meta)


# --- sampling ----------------------------------------------------------------

class _CompiledNode:
    __slots__ = ("name", "domain_size", "parent_positions", "strides", "cum")

    def __init__(self, name: str, domain_size: int,
                 parent_positions: list[int], strides: list[int], cum: np.ndarray):
        self.name = name
        self.domain_size = domain_size
        self.parent_positions = parent_positions
        self.strides = strides
        self.cum = cum


def _compile_sampler(graph: CausalGraph) -> tuple[list[str], list[_CompiledNode]]:
    order = list(graph.topological_order())
    pos = {n: i for i, n in enumerate(order)}
    nodes: list[_CompiledNode] = []
    for name in order:
        mech = graph.mechanisms[name]
        psizes = [len(graph.domain(p)) for p in mech.parents]
        strides = []
        acc = 1
        for s in reversed(psizes):
            strides.append(acc)
            acc *= s
        strides.reverse()
        table = np.empty((max(acc, 1), len(graph.domain(name))), dtype=np.float64)
        for key, p in mech.table.items():
            flat = 0
            for parent, value, stride in zip(mech.parents, key, strides):
                flat += graph.domain(parent).index(value) * stride
            table[flat] = p
        cum = np.cumsum(table, axis=1)
        cum[:, -1] = 1.0
        nodes.append(_CompiledNode(
            name, len(graph.domain(name)),
            [pos[p] for p in mech.parents], strides, cum,
        ))
    return order, nodes


def sample(graph: CausalGraph, n: int, seed: int) -> SampleSet:
    """Seeded ancestral sampling; deterministic for a fixed seed."""
    graph.require_valid()
    if n < 1:
        raise InvalidArgument("sample needs n >= 1")
    order, nodes = _compile_sampler(graph)
    rng = np.random.Generator(np.random.PCG64(seed))
    cols: list[np.ndarray] = []
    for node in nodes:
        if node.parent_positions:
            row_idx = np.zeros(n, dtype=np.int64)
            for ppos, stride in zip(node.parent_positions, node.strides):
                row_idx += cols[ppos] * stride
            cum = node.cum[row_idx]
        else:
            cum = np.broadcast_to(node.cum[0], (n, node.domain_size))
        u = rng.random(n)
        cols.append((cum > u[:, None]).argmax(axis=1))
    columns = {name: cols[i] for i, name in enumerate(order)}
    return SampleSet(graph, n, seed, columns)


# --- counterfactuals ---------------------------------------------------------

class _NoiseNode:
    """Noise bins for one node: intervals of u on which every row is constant."""

    __slots__ = ("name", "parents", "widths", "value_of", "row_index", "lows")

    def __init__(self, graph: CausalGraph, name: str):
        mech = graph.mechanisms[name]
        cuts = {0.0, 1.0}
        cums: dict[tuple[str, ...], list[float]] = {}
        for key, p in mech.table.items():
            acc = 0.0
            row_cum = []
            for x in p:
                acc += x
                row_cum.append(min(acc, 1.0))
            row_cum[-1] = 1.0
            cums[key] = row_cum
            cuts.update(row_cum)
        edges = sorted(cuts)
        lows, widths = [], []
        for lo, hi in zip(edges, edges[1:]):
            if hi > lo:
                lows.append(lo)
                widths.append(hi - lo)
        self.name = name
        self.parents = mech.parents
        self.lows = lows
        self.widths = widths
        # value_of[row][bin] -> domain index chosen when u falls in that bin
        keys = sorted(mech.table)
        self.row_index = {k: i for i, k in enumerate(keys)}
        self.value_of = [
            [bisect.bisect_right(cums[k], lo) for lo in lows] for k in keys
        ]


def _deterministic_pass(
    order: list[str],
    noise: dict[str, _NoiseNode],
    bins: Mapping[str, int],
    graph: CausalGraph,
    fixed: Mapping[str, str] | None = None,
) -> dict[str, str]:
    """Evaluate every node's value given one bin per node (and forced values)."""
    values: dict[str, str] = {}
    for name in order:
        if fixed and name in fixed:
            values[name] = fixed[name]
            continue
        nn = noise[name]
        key = tuple(values[p] for p in nn.parents)
        vidx = nn.value_of[nn.row_index[key]][bins[name]]
        values[name] = graph.domain(name)[vidx]
    return values


def counterfactual(
    graph: CausalGraph,
    evidence: Mapping[str, str],
    iv: Intervention,
    target: str,
    seed: int = 0,
    noise_limit: int = NOISE_CONFIG_LIMIT,
    mc_draws: int = MC_ABDUCTION_DRAWS,
    cancel: CancelSignal | None = None,
) -> Distribution:
    """Abduction-action-prediction for P(target_{do(...)} | evidence)."""
    graph.require_valid()
    iv.check(graph)
    if not graph.has_variable(target):
        raise UnknownNode(f"unknown target {target!r}")
    for node, value in evidence.items():
        if not graph.has_variable(node):
            raise UnknownNode(f"evidence names unknown variable {node!r}")
        if value not in graph.domain(node):
            raise ValueNotInDomain(f"evidence {node}={value!r} not in domain")

    order = list(graph.topological_order())
    noise = {name: _NoiseNode(graph, name) for name in order}
    total_configs = 1
    for name in order:
        total_configs *= len(noise[name].widths)
    if total_configs > noise_limit:
        return _counterfactual_mc(graph, evidence, iv, target, seed, mc_draws, order)

    domain = graph.domain(target)
    tally = [0.0] * len(domain)
    z = 0.0
    iv_fixed = dict(iv.assignments)
    counter = 0

    def descend(depth: int, weight: float, values: dict[str, str],
                bins: dict[str, int]) -> None:
        nonlocal z, counter
        counter += 1
        if counter % 10_000 == 0:
            _check_cancel(cancel)
        if depth == len(order):
            twin = _deterministic_pass(order, noise, bins, graph, iv_fixed)
            tally[domain.index(twin[target])] += weight
            z += weight
            return
        name = order[depth]
        nn = noise[name]
        key = tuple(values[p] for p in nn.parents)
        value_row = nn.value_of[nn.row_index[key]]
        want = evidence.get(name)
        for b, width in enumerate(nn.widths):
            val = graph.domain(name)[value_row[b]]
            if want is not None and val != want:
                continue
            values[name] = val
            bins[name] = b
            descend(depth + 1, weight * width, values, bins)
        values.pop(name, None)

    descend(0, 1.0, {}, {})
    if z <= 0.0:
        raise ZeroProbabilityEvidence(f"evidence {dict(evidence)} has probability 0")
    p = tuple(x / z for x in tally)
    return Distribution(
        variable=target, domain=domain, p=p,
        meta={"method": "noise_enumeration", "do": dict(iv.assignments),
              "given": dict(evidence), "configs": total_configs},
    )


def _counterfactual_mc(
    graph: CausalGraph,
    evidence: Mapping[str, str],
    iv: Intervention,
    target: str,
    seed: int,
    draws: int,
    order: list[str],
) -> Distribution:
    """Seeded MC abduction fallback when the joint noise space is too large."""
    rng = np.random.Generator(np.random.PCG64(seed))
    pos = {n: i for i, n in enumerate(order)}
    _, nodes = _compile_sampler(graph)
    node_by_name = {nd.name: nd for nd in nodes}
    compiled = [node_by_name[n] for n in order]

    u = rng.random((draws, len(order)))
    factual: list[np.ndarray] = []
    for j, node in enumerate(compiled):
        if node.parent_positions:
            row_idx = np.zeros(draws, dtype=np.int64)
            for ppos, stride in zip(node.parent_positions, node.strides):
                row_idx += factual[ppos] * stride
            cum = node.cum[row_idx]
        else:
            cum = np.broadcast_to(node.cum[0], (draws, node.domain_size))
        factual.append((cum > u[:, j][:, None]).argmax(axis=1))

    mask = np.ones(draws, dtype=bool)
    for node, value in evidence.items():
        vidx = graph.domain(node).index(value)
        mask &= factual[pos[node]] == vidx
    accepted = int(mask.sum())
    if accepted == 0:
        raise ZeroProbabilityEvidence(
            f"evidence {dict(evidence)} matched none of {draws} abduction draws"
        )

    twin: list[np.ndarray] = []
    for j, node in enumerate(compiled):
        name = order[j]
        if name in iv.assignments:
            vidx = graph.domain(name).index(iv.assignments[name])
            twin.append(np.full(draws, vidx, dtype=np.int64))
            continue
        if node.parent_positions:
            row_idx = np.zeros(draws, dtype=np.int64)
            for ppos, stride in zip(node.parent_positions, node.strides):
                row_idx += twin[ppos] * stride
            cum = node.cum[row_idx]
        else:
            cum = np.broadcast_to(node.cum[0], (draws, node.domain_size))
        twin.append((cum > u[:, j][:, None]).argmax(axis=1))

    domain = graph.domain(target)
    counts = np.bincount(twin[pos[target]][mask], minlength=len(domain))
    p = tuple(float(x) for x in counts / accepted)
    return Distribution(
        variable=target, domain=domain, p=p,
        meta={"method": "mc_abduction", "flag": "ScaleLimit", "seed": seed,
              "draws": draws, "accepted": accepted,
              "do": dict(iv.assignments), "given": dict(evidence)},
    )
