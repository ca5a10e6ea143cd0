"""Independent reference implementations used to cross-check the package.

Everything here works on plain dicts extracted from a graph and is written in
a different style from the library (recursive enumeration instead of tensor
products, explicit twin networks instead of in-place abduction) so the two
sides cannot share a bug.
"""

from __future__ import annotations

from itertools import product


def extract(graph):
    """Pull (domains, parents, cpts) out of a CausalGraph as plain dicts."""
    domains = {v.id: list(v.domain) for v in graph.variables}
    parents = {v.id: list(graph.mechanisms[v.id].parents) for v in graph.variables}
    cpts = {
        v.id: {key: list(p) for key, p in graph.mechanisms[v.id].table.items()}
        for v in graph.variables
    }
    return domains, parents, cpts


def joint_of(domains, parents, cpts, assignment):
    prob = 1.0
    for name, value in assignment.items():
        key = tuple(assignment[p] for p in parents[name])
        prob *= cpts[name][key][domains[name].index(value)]
    return prob


def enumerate_conditional(domains, parents, cpts, target, fixed):
    """P(target | fixed) by recursive sum over the remaining variables."""
    names = sorted(domains)

    def total(remaining, partial):
        if not remaining:
            return joint_of(domains, parents, cpts, partial)
        head, *rest = remaining
        if head in partial:
            return total(rest, partial)
        acc = 0.0
        for value in domains[head]:
            partial[head] = value
            acc += total(rest, partial)
        del partial[head]
        return acc

    weights = []
    for value in domains[target]:
        partial = dict(fixed)
        partial[target] = value
        weights.append(total([n for n in names if n not in partial], partial))
    z = sum(weights)
    if z == 0:
        raise ZeroDivisionError("evidence has probability zero")
    return [w / z for w in weights]


def surgery(domains, parents, cpts, do):
    """Return (parents, cpts) after cutting into each intervened node."""
    new_parents = dict(parents)
    new_cpts = {k: dict(v) for k, v in cpts.items()}
    for node, value in do.items():
        new_parents[node] = []
        new_cpts[node] = {(): [1.0 if d == value else 0.0 for d in domains[node]]}
    return new_parents, new_cpts


def interventional(domains, parents, cpts, target, do, given=None):
    p2, c2 = surgery(domains, parents, cpts, do)
    fixed = dict(given or {})
    fixed.update(do)
    return enumerate_conditional(domains, p2, c2, target, fixed)


def has_cycle(nodes, edges):
    """Three-color DFS over an edge list."""
    adj = {n: [] for n in nodes}
    for src, dst in edges:
        adj.setdefault(src, []).append(dst)
    color = {n: 0 for n in adj}

    def visit(n):
        color[n] = 1
        for m in adj.get(n, []):
            if color.get(m, 0) == 1:
                return True
            if color.get(m, 0) == 0 and visit(m):
                return True
        color[n] = 2
        return False

    return any(color[n] == 0 and visit(n) for n in list(adj))


def tv_influence(domains, parents, cpts, src, dst):
    """Max total-variation distance between dst rows as src varies."""
    ps = parents[dst]
    others = [p for p in ps if p != src]
    best = 0.0
    for ctx in product(*(domains[o] for o in others)):
        ctx_map = dict(zip(others, ctx))
        rows = []
        for s in domains[src]:
            ctx_map[src] = s
            rows.append(cpts[dst][tuple(ctx_map[p] for p in ps)])
        for i in range(len(rows)):
            for j in range(i + 1, len(rows)):
                tv = 0.5 * sum(abs(a - b) for a, b in zip(rows[i], rows[j]))
                best = max(best, tv)
    return best


# --- twin-network counterfactual oracle ---------------------------------------

def noise_bins(domains, cpts, node):
    """Partition [0,1) so every CPT row of `node` is constant on each bin.

    Returns (widths, chooser) where chooser(row_key, bin_index) gives the
    domain value index selected when the node's noise lands in that bin.
    """
    cuts = {0.0, 1.0}
    cums = {}
    for key, row in cpts[node].items():
        acc, cum = 0.0, []
        for x in row:
            acc += x
            cum.append(min(acc, 1.0))
        cum[-1] = 1.0
        cums[key] = cum
        cuts.update(cum)
    edges = sorted(cuts)
    bins = [(lo, hi) for lo, hi in zip(edges, edges[1:]) if hi > lo]
    widths = [hi - lo for lo, hi in bins]

    def chooser(key, b):
        lo = bins[b][0]
        cum = cums[key]
        for i, c in enumerate(cum):
            if c > lo:
                return i
        return len(cum) - 1

    return widths, chooser


def twin_counterfactual(graph, evidence, do, target):
    """P(target_do | evidence) via an explicit twin Bayesian network.

    The twin network has, per original node X, a noise variable u:X shared by
    a factual copy f:X and an intervened copy t:X; the query is answered by
    the same recursive enumerator used everywhere else in this module.
    """
    domains, parents, cpts = extract(graph)
    order = sorted(domains)

    tw_domains, tw_parents, tw_cpts = {}, {}, {}
    for node in order:
        widths, chooser = noise_bins(domains, cpts, node)
        ubins = [str(i) for i in range(len(widths))]
        tw_domains[f"u:{node}"] = ubins
        tw_parents[f"u:{node}"] = []
        tw_cpts[f"u:{node}"] = {(): list(widths)}

        for side in ("f", "t"):
            name = f"{side}:{node}"
            tw_domains[name] = domains[node]
            if side == "t" and node in do:
                tw_parents[name] = []
                tw_cpts[name] = {(): [1.0 if d == do[node] else 0.0
                                      for d in domains[node]]}
                continue
            ps = [f"{side}:{p}" for p in parents[node]] + [f"u:{node}"]
            ps_sorted = sorted(ps)
            tw_parents[name] = ps_sorted
            table = {}
            for combo in product(*(tw_domains[p] for p in ps_sorted)):
                combo_map = dict(zip(ps_sorted, combo))
                key = tuple(combo_map[f"{side}:{p}"] for p in parents[node])
                b = int(combo_map[f"u:{node}"])
                vidx = chooser(key, b)
                table[combo] = [1.0 if i == vidx else 0.0
                                for i in range(len(domains[node]))]
            tw_cpts[name] = table

    fixed = {f"f:{n}": v for n, v in evidence.items()}
    return enumerate_conditional(tw_domains, tw_parents, tw_cpts, f"t:{target}", fixed)


# --- executed-system success oracle --------------------------------------------

def executed_success_rate(scenario, policy, forced=None):
    """P(success) of ground truth with the decision node driven by `policy`.

    `policy` maps tuples of attribute values (scenario.attributes order) to a
    mode label. Computed by direct summation over world assignments, without
    any package graph machinery.
    """
    gt = scenario.ground_truth
    domains, parents, cpts = extract(gt)
    decision = scenario.decision_variable
    success = scenario.success_variable
    forced = dict(forced or {})

    order = [v.id for v in gt.variables]
    # resolve sampling order: parents before children, decision after attributes
    resolved = []
    pending = set(order)
    while pending:
        for name in order:
            if name not in pending:
                continue
            deps = set(parents[name]) if name != decision else set(scenario.attributes)
            if deps <= set(resolved):
                resolved.append(name)
                pending.discard(name)
                break
        else:
            raise AssertionError("unresolvable ordering")

    def recurse(idx, partial, weight):
        if weight == 0.0:
            return 0.0
        if idx == len(resolved):
            return weight if partial[success] == scenario.success_value else 0.0
        name = resolved[idx]
        if name in forced:
            partial[name] = forced[name]
            out = recurse(idx + 1, partial, weight)
            del partial[name]
            return out
        if name == decision:
            mode = policy[tuple(partial[a] for a in scenario.attributes)]
            partial[name] = mode
            out = recurse(idx + 1, partial, weight)
            del partial[name]
            return out
        key = tuple(partial[p] for p in parents[name])
        row = cpts[name][key]
        acc = 0.0
        for value, p in zip(domains[name], row):
            partial[name] = value
            acc += recurse(idx + 1, partial, weight * p)
            del partial[name]
        return acc

    return recurse(0, {}, 1.0)
