"""Causal graph document: variables, edges, CPT mechanisms, validation.

The graph is an immutable value; every mutation returns a new `CausalGraph`.
CPT rows are keyed by full parent assignments in canonical parent order
(lexicographic by parent id). Each node's exogenous noise follows the
inverse-CDF convention: u ~ Uniform[0,1] picks the first domain value whose
cumulative row probability exceeds u, with the domain order fixed by the
variable definition.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import product
from typing import Any, Iterable, Iterator, Mapping, Sequence

from .errors import (
    CycleWouldForm,
    DuplicateEdge,
    DuplicateId,
    DuplicateRow,
    IncompleteAssignment,
    InvalidEdge,
    InvalidGraph,
    InvalidVariable,
    NegativeProbability,
    NotADag,
    RowMissing,
    RowShapeMismatch,
    RowSumNotOne,
    UnknownEdge,
    UnknownEndpoint,
    UnknownId,
    UnknownNode,
    UnknownParentInKey,
    ValueNotInDomain,
)

ROW_SUM_TOL = 1e-9

# |sum - 1| below this is float noise from a prior normalization, not a
# malformed row; leaving such rows untouched keeps save/load byte-stable.
_MACHINE_BAND = 2 ** -40


def normalize_row(p: Sequence[float]) -> tuple[float, ...]:
    """Rescale a probability row to sum to 1 (idempotent at float precision)."""
    values = tuple(float(x) for x in p)
    total = sum(values)
    if abs(total - 1.0) <= len(values) * _MACHINE_BAND:
        return values
    return tuple(x / total for x in values)


@dataclass(frozen=True)
class Variable:
    """A named discrete variable with an ordered categorical domain."""

    id: str
    domain: tuple[str, ...]
    note: str = ""
    prominence: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "domain", tuple(self.domain))

    def check(self) -> None:
        if not self.id or not isinstance(self.id, str):
            raise InvalidVariable("variable id must be a non-empty string")
        if len(self.domain) < 2:
            raise InvalidVariable(f"{self.id}: domain needs at least 2 labels")
        if any(not lab for lab in self.domain):
            raise InvalidVariable(f"{self.id}: empty domain label")
        if len(set(self.domain)) != len(self.domain):
            raise InvalidVariable(f"{self.id}: duplicate domain labels")
        if not 0.0 <= self.prominence <= 1.0:
            raise InvalidVariable(f"{self.id}: prominence {self.prominence} outside [0,1]")


@dataclass(frozen=True)
class Edge:
    """Directed edge with an operator-assigned strength annotation in [0,1]."""

    src: str
    dst: str
    strength: float = 0.5

    @property
    def id(self) -> str:
        return f"{self.src}->{self.dst}"

    def check(self) -> None:
        if self.src == self.dst:
            raise InvalidEdge(f"self-edge {self.id}")
        if not 0.0 <= self.strength <= 1.0:
            raise InvalidEdge(f"{self.id}: strength {self.strength} outside [0,1]")


@dataclass(frozen=True)
class Mechanism:
    """A node's CPT: one probability row per full parent assignment.

    `table` maps parent value tuples (aligned to `parents`, which is the
    canonical lexicographic parent order) to probability vectors aligned to
    the node's domain order.
    """

    node: str
    parents: tuple[str, ...]
    table: dict[tuple[str, ...], tuple[float, ...]]

    @classmethod
    def from_rows(cls, node: str, rows: Iterable[Mapping[str, Any]]) -> "Mechanism":
        """Build from `[{"given": {parent: value}, "p": [...]}, ...]` rows."""
        rows = list(rows)
        parents: tuple[str, ...] = ()
        if rows:
            parents = tuple(sorted(rows[0].get("given", {})))
        table: dict[tuple[str, ...], tuple[float, ...]] = {}
        for row in rows:
            given = row.get("given", {})
            if tuple(sorted(given)) != parents:
                raise UnknownParentInKey(
                    f"{node}: row keys disagree; expected parents {list(parents)}"
                )
            key = tuple(str(given[p]) for p in parents)
            if key in table:
                raise DuplicateRow(f"{node}: duplicate row for {dict(given)}")
            table[key] = tuple(float(x) for x in row["p"])
        return cls(node=node, parents=parents, table=table)

    def row(self, assignment: Mapping[str, str]) -> tuple[float, ...]:
        key = tuple(assignment[p] for p in self.parents)
        return self.table[key]

    def rows_as_dicts(self) -> list[dict[str, Any]]:
        return [
            {"given": dict(zip(self.parents, key)), "p": list(p)}
            for key, p in self.table.items()
        ]


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    subject: str   # node or edge id
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"severity": self.severity, "subject": self.subject, "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    is_valid: bool
    issues: tuple[Issue, ...]

    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "warning"]

    def to_dict(self) -> dict[str, Any]:
        return {"is_valid": self.is_valid, "issues": [i.to_dict() for i in self.issues]}


@dataclass(frozen=True, eq=False)
class CausalGraph:
    """Immutable causal graph document. All mutation methods return new graphs.

    Equality is identity; compare content via `graph_io.graph_to_dict` or
    `graph_io.dumps_graph`. Identity hashing keeps graph values usable as
    cache keys despite the dict-valued fields.
    """

    version: int = 0
    variables: tuple[Variable, ...] = ()
    edges: tuple[Edge, ...] = ()
    mechanisms: dict[str, Mechanism] = field(default_factory=dict)
    layout: dict[str, tuple[float, float]] = field(default_factory=dict)
    stale: frozenset[str] = frozenset()
    extras: dict[str, Any] = field(default_factory=dict)

    # --- lookups -------------------------------------------------------------

    @cached_property
    def _by_id(self) -> dict[str, Variable]:
        return {v.id: v for v in self.variables}

    @cached_property
    def _parents(self) -> dict[str, tuple[str, ...]]:
        # edges with unknown endpoints are validation errors, not structure
        acc: dict[str, list[str]] = {v.id: [] for v in self.variables}
        for e in self.edges:
            if e.dst in acc and e.src in acc:
                acc[e.dst].append(e.src)
        return {n: tuple(sorted(ps)) for n, ps in acc.items()}

    @cached_property
    def _children(self) -> dict[str, tuple[str, ...]]:
        acc: dict[str, list[str]] = {v.id: [] for v in self.variables}
        for e in self.edges:
            if e.src in acc and e.dst in acc:
                acc[e.src].append(e.dst)
        return {n: tuple(sorted(cs)) for n, cs in acc.items()}

    def has_variable(self, node: str) -> bool:
        return node in self._by_id

    def variable(self, node: str) -> Variable:
        try:
            return self._by_id[node]
        except KeyError:
            raise UnknownId(f"no variable {node!r}") from None

    def domain(self, node: str) -> tuple[str, ...]:
        return self.variable(node).domain

    def parent_ids(self, node: str) -> tuple[str, ...]:
        self.variable(node)
        return self._parents.get(node, ())

    def children_ids(self, node: str) -> tuple[str, ...]:
        self.variable(node)
        return self._children.get(node, ())

    def has_edge(self, src: str, dst: str) -> bool:
        return any(e.src == src and e.dst == dst for e in self.edges)

    def edge(self, src: str, dst: str) -> Edge:
        for e in self.edges:
            if e.src == src and e.dst == dst:
                return e
        raise UnknownEdge(f"no edge {src}->{dst}")

    def ancestors(self, node: str) -> frozenset[str]:
        seen: set[str] = set()
        stack = list(self.parent_ids(node))
        while stack:
            cur = stack.pop()
            if cur not in seen:
                seen.add(cur)
                stack.extend(self._parents.get(cur, ()))
        return frozenset(seen)

    @property
    def assignment_count(self) -> int:
        n = 1
        for v in self.variables:
            n *= len(v.domain)
        return n

    # --- mutations -----------------------------------------------------------

    def add_node(self, v: Variable) -> "CausalGraph":
        v.check()
        if v.id in self._by_id:
            raise DuplicateId(f"variable {v.id!r} already exists")
        return replace(self, variables=self.variables + (v,))

    def add_edge(self, src: str, dst: str, strength: float = 0.5) -> "CausalGraph":
        for end in (src, dst):
            if end not in self._by_id:
                raise UnknownEndpoint(f"no variable {end!r}")
        if self.has_edge(src, dst):
            raise DuplicateEdge(f"edge {src}->{dst} already exists")
        if src == dst or self._reaches(dst, src):
            raise CycleWouldForm(f"edge {src}->{dst} would close a directed cycle")
        e = Edge(src=src, dst=dst, strength=strength)
        e.check()
        return replace(self, edges=self.edges + (e,), stale=self.stale | {dst})

    def remove_element(self, element_id: str) -> "CausalGraph":
        if "->" in element_id:
            src, _, dst = element_id.partition("->")
            if not self.has_edge(src, dst):
                raise UnknownId(f"no edge {element_id!r}")
            edges = tuple(e for e in self.edges if (e.src, e.dst) != (src, dst))
            return replace(self, edges=edges, stale=self.stale | {dst})
        if element_id not in self._by_id:
            raise UnknownId(f"no element {element_id!r}")
        node = element_id
        children = set(self.children_ids(node))
        variables = tuple(v for v in self.variables if v.id != node)
        edges = tuple(e for e in self.edges if node not in (e.src, e.dst))
        mechanisms = {n: m for n, m in self.mechanisms.items() if n != node}
        layout = {n: p for n, p in self.layout.items() if n != node}
        stale = (self.stale | children) - {node}
        return replace(
            self, variables=variables, edges=edges, mechanisms=mechanisms,
            layout=layout, stale=stale,
        )

    def set_mechanism(self, m: Mechanism) -> "CausalGraph":
        if m.node not in self._by_id:
            raise UnknownNode(f"no variable {m.node!r}")
        parents = self.parent_ids(m.node)
        if m.parents != parents:
            unknown = set(m.parents) - set(parents)
            if unknown:
                raise UnknownParentInKey(
                    f"{m.node}: row keys use non-parents {sorted(unknown)}"
                )
            raise RowMissing(
                f"{m.node}: rows keyed by {list(m.parents)}, parents are {list(parents)}"
            )
        domain = self.domain(m.node)
        expected = 1
        for p in parents:
            expected *= len(self.domain(p))
        if len(m.table) != expected:
            raise RowMissing(
                f"{m.node}: {len(m.table)} rows, need one per parent assignment ({expected})"
            )
        table: dict[tuple[str, ...], tuple[float, ...]] = {}
        for key, p in m.table.items():
            for parent, value in zip(parents, key):
                if value not in self.domain(parent):
                    raise ValueNotInDomain(
                        f"{m.node}: row key {parent}={value!r} not in {parent}'s domain"
                    )
            if len(p) != len(domain):
                raise RowShapeMismatch(
                    f"{m.node}: row {dict(zip(parents, key))} has {len(p)} entries, domain has {len(domain)}"
                )
            if any(x < 0 for x in p):
                raise NegativeProbability(f"{m.node}: negative entry in row {dict(zip(parents, key))}")
            if abs(sum(p) - 1.0) > ROW_SUM_TOL:
                raise RowSumNotOne(
                    f"{m.node}: row {dict(zip(parents, key))} sums to {sum(p)!r}"
                )
            table[key] = normalize_row(p)
        mech = Mechanism(node=m.node, parents=parents, table=table)
        mechanisms = dict(self.mechanisms)
        mechanisms[m.node] = mech
        return replace(self, mechanisms=mechanisms, stale=self.stale - {m.node})

    def annotate(
        self,
        element_id: str,
        *,
        note: str | None = None,
        prominence: float | None = None,
        strength: float | None = None,
        position: tuple[float, float] | None = None,
    ) -> "CausalGraph":
        """Update operator annotations on a node or edge."""
        if "->" in element_id:
            src, _, dst = element_id.partition("->")
            old = self.edge(src, dst)
            if strength is not None:
                new = replace(old, strength=strength)
                new.check()
                edges = tuple(new if e is old else e for e in self.edges)
                return replace(self, edges=edges)
            return self
        v = self.variable(element_id)
        g = self
        if note is not None or prominence is not None:
            new = replace(
                v,
                note=v.note if note is None else note,
                prominence=v.prominence if prominence is None else prominence,
            )
            new.check()
            variables = tuple(new if x is v else x for x in self.variables)
            g = replace(g, variables=variables)
        if position is not None:
            layout = dict(g.layout)
            layout[element_id] = (float(position[0]), float(position[1]))
            g = replace(g, layout=layout)
        return g

    def _reaches(self, start: str, goal: str) -> bool:
        stack = [start]
        seen: set[str] = set()
        while stack:
            cur = stack.pop()
            if cur == goal:
                return True
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(self._children.get(cur, ()))
        return False

    # --- analysis ------------------------------------------------------------

    def topological_order(self) -> tuple[str, ...]:
        """Node ids with every edge pointing forward; ties broken by id."""
        indeg = {v.id: 0 for v in self.variables}
        for e in self.edges:
            if e.dst in indeg and e.src in indeg:
                indeg[e.dst] += 1
        ready = [n for n, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        order: list[str] = []
        while ready:
            n = heapq.heappop(ready)
            order.append(n)
            for c in self._children.get(n, ()):
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(order) != len(self.variables):
            cyclic = sorted(n for n, d in indeg.items() if n not in order)
            raise NotADag(f"cycle through {cyclic}")
        return tuple(order)

    @cached_property
    def _validation(self) -> ValidationReport:
        issues: list[Issue] = []
        ids = [v.id for v in self.variables]
        seen: set[str] = set()
        for v in self.variables:
            if v.id in seen:
                issues.append(Issue("error", v.id, "duplicate variable id"))
            seen.add(v.id)
            try:
                v.check()
            except InvalidVariable as exc:
                issues.append(Issue("error", v.id, exc.detail))
        known = set(ids)
        edge_keys: set[tuple[str, str]] = set()
        for e in self.edges:
            if (e.src, e.dst) in edge_keys:
                issues.append(Issue("error", e.id, "duplicate edge"))
            edge_keys.add((e.src, e.dst))
            for end in (e.src, e.dst):
                if end not in known:
                    issues.append(Issue("error", e.id, f"unknown endpoint {end!r}"))
            try:
                e.check()
            except InvalidEdge as exc:
                issues.append(Issue("error", e.id, exc.detail))
        try:
            self.topological_order()
        except NotADag as exc:
            issues.append(Issue("error", "graph", exc.detail))
        for node, mech in self.mechanisms.items():
            if node not in known:
                issues.append(Issue("error", node, "mechanism for unknown variable"))
        for v in self.variables:
            issues.extend(self._check_mechanism(v))
        incident = {e.src for e in self.edges} | {e.dst for e in self.edges}
        for v in self.variables:
            if v.id not in incident and len(self.variables) > 1:
                issues.append(Issue("warning", v.id, "isolated node (no incident edges)"))
        is_valid = not any(i.severity == "error" for i in issues)
        return ValidationReport(is_valid=is_valid, issues=tuple(issues))

    def _check_mechanism(self, v: Variable) -> list[Issue]:
        mech = self.mechanisms.get(v.id)
        if mech is None:
            return [Issue("error", v.id, "missing mechanism")]
        issues: list[Issue] = []
        if v.id in self.stale:
            issues.append(Issue("error", v.id, "stale mechanism: parent set changed since it was supplied"))
        parents = self._parents.get(v.id, ())
        if mech.parents != parents:
            issues.append(Issue(
                "error", v.id,
                f"mechanism keyed by {list(mech.parents)}, parents are {list(parents)}",
            ))
            return issues
        expected = 1
        for p in parents:
            if p in self._by_id:
                expected *= len(self.domain(p))
        if len(mech.table) != expected:
            issues.append(Issue("error", v.id, f"{len(mech.table)} CPT rows, expected {expected}"))
        for key, p in mech.table.items():
            for parent, value in zip(parents, key):
                if parent in self._by_id and value not in self.domain(parent):
                    issues.append(Issue("error", v.id, f"row key {parent}={value!r} not in domain"))
            if len(p) != len(v.domain):
                issues.append(Issue("error", v.id, f"row {dict(zip(parents, key))} has wrong length"))
                continue
            if any(x < 0 for x in p):
                issues.append(Issue("error", v.id, f"negative probability in row {dict(zip(parents, key))}"))
            if abs(sum(p) - 1.0) > ROW_SUM_TOL:
                issues.append(Issue("error", v.id, f"row {dict(zip(parents, key))} sums to {sum(p)!r}"))
        return issues

    def validate(self) -> ValidationReport:
        return self._validation

    def require_valid(self) -> None:
        report = self._validation
        if not report.is_valid:
            first = report.errors()[0]
            raise InvalidGraph(f"graph is invalid: [{first.subject}] {first.message}")

    def joint_probability(self, assignment: Mapping[str, str]) -> float:
        """Markov-factorized probability of one full assignment."""
        self.require_valid()
        for v in self.variables:
            if v.id not in assignment:
                raise IncompleteAssignment(f"assignment missing {v.id!r}")
            if assignment[v.id] not in v.domain:
                raise ValueNotInDomain(f"{v.id}={assignment[v.id]!r} not in domain")
        for name in assignment:
            if name not in self._by_id:
                raise UnknownNode(f"assignment names unknown variable {name!r}")
        prob = 1.0
        for v in self.variables:
            mech = self.mechanisms[v.id]
            row = mech.row(assignment)
            prob *= row[v.domain.index(assignment[v.id])]
        return prob

    def edge_influence(self, src: str, dst: str) -> float:
        """Max total-variation swing of dst's CPT rows as src varies.

        The maximum is over contexts (assignments to dst's other parents) and
        over pairs of src values; 0 means dst's CPT ignores src entirely.
        """
        self.require_valid()
        self.edge(src, dst)
        mech = self.mechanisms[dst]
        others = [p for p in mech.parents if p != src]
        src_pos = mech.parents.index(src)
        best = 0.0
        for ctx in product(*(self.domain(p) for p in others)):
            rows = []
            for s_val in self.domain(src):
                key_map = dict(zip(others, ctx))
                key_map[src] = s_val
                rows.append(mech.table[tuple(key_map[p] for p in mech.parents)])
            for i in range(len(rows)):
                for j in range(i + 1, len(rows)):
                    tv = 0.5 * sum(abs(a - b) for a, b in zip(rows[i], rows[j]))
                    best = max(best, tv)
        return min(best, 1.0)

    def full_assignments(self) -> Iterator[dict[str, str]]:
        """Iterate every full assignment (document variable order)."""
        names = [v.id for v in self.variables]
        for combo in product(*(v.domain for v in self.variables)):
            yield dict(zip(names, combo))
