"""Graph edit distance between process graphs and the relative GED score.

Costs are unit: inserting, deleting or relabeling a node costs 1, and so
does inserting or deleting an edge. Two nodes substitute for free only when
their categories, gateway types and normalized labels agree. Edge costs are
induced by the node mapping; edge labels are ignored.
"""

from __future__ import annotations

import heapq
import itertools
import re
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph_core import GraphNode, ProcessGraph


@dataclass(frozen=True)
class SearchBudget:
    max_states: int = 10_000
    max_ms: float = 2_000.0


DEFAULT_BUDGET = SearchBudget()


@dataclass(frozen=True)
class GedResult:
    cost: float
    exact: bool
    expanded_states: int
    mapping: tuple[tuple[str, str | None], ...] = ()


@dataclass(frozen=True)
class RGedScore:
    value: float
    exact: bool = True

    @property
    def percent(self) -> float:
        return 100.0 * self.value


_WS = re.compile(r"\s+")


def normalize_label(label: str) -> str:
    return _WS.sub(" ", label.strip().lower())


def node_signature(node: GraphNode) -> tuple:
    """Key under which two nodes substitute at zero cost."""
    return (node.kind.category, node.kind.gateway_type, normalize_label(node.label))


class _Problem:
    """Integer-indexed view of a graph pair shared by the search routines."""

    def __init__(self, a: ProcessGraph, b: ProcessGraph):
        self.a_ids = [n.id for n in a.nodes]
        self.b_ids = [n.id for n in b.nodes]
        a_pos = {nid: i for i, nid in enumerate(self.a_ids)}
        b_pos = {nid: i for i, nid in enumerate(self.b_ids)}
        self.a_sig = [node_signature(n) for n in a.nodes]
        self.b_sig = [node_signature(n) for n in b.nodes]
        self.a_edges = Counter((a_pos[e.source], a_pos[e.target]) for e in a.edges)
        self.b_edges = Counter((b_pos[e.source], b_pos[e.target]) for e in b.edges)
        self.na, self.nb = len(self.a_ids), len(self.b_ids)
        self.a_adj: list[set[int]] = [set() for _ in range(self.na)]
        for (s, t) in self.a_edges:
            self.a_adj[s].add(t)
            self.a_adj[t].add(s)

    def sub_cost(self, i: int, j: int) -> int:
        return 0 if self.a_sig[i] == self.b_sig[j] else 1

    def edit_cost(self, mapping: dict[int, int | None]) -> int:
        """Exact cost of the edit path induced by a complete node mapping of ``a``."""
        cost = 0
        used = set()
        for i, j in mapping.items():
            if j is None:
                cost += 1
            else:
                cost += self.sub_cost(i, j)
                used.add(j)
        cost += self.nb - len(used)
        for (s, t), count in self.a_edges.items():
            ms, mt = mapping[s], mapping[t]
            if ms is None or mt is None:
                cost += count
            else:
                cost += abs(count - self.b_edges.get((ms, mt), 0))
        inverse = {j: i for i, j in mapping.items() if j is not None}
        for (s, t), count in self.b_edges.items():
            if s not in inverse or t not in inverse or (inverse[s], inverse[t]) not in self.a_edges:
                cost += count
        return cost


def _bipartite_mapping(p: _Problem) -> dict[int, int | None]:
    """Riesen-Bunke style assignment over nodes with a local edge-degree estimate."""
    na, nb = p.na, p.nb
    size = na + nb
    big = 1e6
    cost = np.zeros((size, size))
    a_out = Counter(s for (s, _t), c in p.a_edges.items() for _ in range(c))
    a_in = Counter(t for (_s, t), c in p.a_edges.items() for _ in range(c))
    b_out = Counter(s for (s, _t), c in p.b_edges.items() for _ in range(c))
    b_in = Counter(t for (_s, t), c in p.b_edges.items() for _ in range(c))
    for i in range(na):
        for j in range(nb):
            local = abs(a_out[i] - b_out[j]) + abs(a_in[i] - b_in[j])
            cost[i, j] = p.sub_cost(i, j) + local / 2
        cost[i, nb:] = big
        cost[i, nb + i] = 1 + (a_out[i] + a_in[i]) / 2
    for j in range(nb):
        cost[na:, j] = big
        cost[na + j, j] = 1 + (b_out[j] + b_in[j]) / 2
    rows, cols = linear_sum_assignment(cost)
    mapping: dict[int, int | None] = {}
    for r, c in zip(rows, cols):
        if r < na:
            mapping[r] = c if c < nb else None
    return mapping


def _improve(
    p: _Problem, mapping: dict[int, int | None], cost: int, deadline: float
) -> tuple[dict[int, int | None], int]:
    """Swap/reassign local search on a complete mapping; keeps it a valid edit path."""
    improved = True
    while improved and time.monotonic() < deadline:
        improved = False
        keys = list(mapping)
        unused = [j for j in range(p.nb) if j not in set(mapping.values())]
        for x, y in itertools.combinations(keys, 2):
            trial = dict(mapping)
            trial[x], trial[y] = mapping[y], mapping[x]
            c = p.edit_cost(trial)
            if c < cost:
                mapping, cost, improved = trial, c, True
                break
        if improved:
            continue
        for x in keys:
            for j in unused + [None]:
                if mapping[x] == j:
                    continue
                trial = dict(mapping)
                trial[x] = j
                c = p.edit_cost(trial)
                if c < cost:
                    mapping, cost, improved = trial, c, True
                    break
            if improved:
                break
    return mapping, cost


def _lower_bound(p: _Problem, order: list[int], depth: int, used: frozenset[int]) -> int:
    rest_a = order[depth:]
    rest_b = [j for j in range(p.nb) if j not in used]
    common = sum((Counter(p.a_sig[i] for i in rest_a) & Counter(p.b_sig[j] for j in rest_b)).values())
    node_bound = max(len(rest_a), len(rest_b)) - common
    pending_a = set(rest_a)
    pending_b = set(rest_b)
    ea = sum(c for (s, t), c in p.a_edges.items() if s in pending_a or t in pending_a)
    eb = sum(c for (s, t), c in p.b_edges.items() if s in pending_b or t in pending_b)
    return node_bound + abs(ea - eb)


def _step_cost(p: _Problem, order: list[int], depth: int, assigned: tuple, target: int | None) -> int:
    """Cost of mapping ``order[depth]`` to ``target`` given the earlier assignments."""
    u = order[depth]
    cost = 1 if target is None else p.sub_cost(u, target)
    for k in range(depth + 1):
        w = order[k]
        mw = target if k == depth else assigned[k]
        pairs = [(u, w)] if w == u else [(u, w), (w, u)]
        for (s, t) in pairs:
            ca = p.a_edges.get((s, t), 0)
            ms = target if s == u else mw
            mt = target if t == u else mw
            if ms is None or mt is None:
                cost += ca
            else:
                cost += abs(ca - p.b_edges.get((ms, mt), 0))
    return cost


def _completion_cost(p: _Problem, used: frozenset[int]) -> int:
    rest = [j for j in range(p.nb) if j not in used]
    rest_set = set(rest)
    edges = sum(c for (s, t), c in p.b_edges.items() if s in rest_set or t in rest_set)
    return len(rest) + edges


def ged(a: ProcessGraph, b: ProcessGraph, budget: SearchBudget = DEFAULT_BUDGET) -> GedResult:
    """Graph edit distance by A* within ``budget``, else a bipartite upper bound.

    The returned ``exact`` flag tells which of the two the cost is.
    """
    p = _Problem(a, b)
    if p.na == 0:
        cost = p.nb + sum(p.b_edges.values())
        return GedResult(float(cost), True, 0)
    deadline = time.monotonic() + budget.max_ms / 1000.0

    upper_map = _bipartite_mapping(p)
    upper = p.edit_cost(upper_map)
    upper_map, upper = _improve(p, upper_map, upper, deadline)

    order = sorted(range(p.na), key=lambda i: -len(p.a_adj[i]))
    root_bound = _lower_bound(p, order, 0, frozenset())

    def result(mapping: dict[int, int | None], cost: int, exact: bool, expanded: int) -> GedResult:
        named = tuple(
            (p.a_ids[i], None if mapping[i] is None else p.b_ids[mapping[i]]) for i in range(p.na)
        )
        return GedResult(float(cost), exact, expanded, named)

    if root_bound >= upper:
        return result(upper_map, upper, True, 0)

    counter = itertools.count()
    # (f, -depth, tiebreak, g, assignment tuple, used set, complete flag)
    heap = [(root_bound, 0, next(counter), 0, (), frozenset(), False)]
    expanded = 0
    while heap:
        f, neg_depth, _, g, assigned, used, complete = heapq.heappop(heap)
        if complete:
            mapping = {order[k]: assigned[k] for k in range(p.na)}
            return result(mapping, g, True, expanded)
        if f >= upper:
            # nothing left can beat the incumbent, which is therefore optimal
            return result(upper_map, upper, True, expanded)
        expanded += 1
        if expanded > budget.max_states or time.monotonic() > deadline:
            return result(upper_map, upper, False, expanded)
        depth = -neg_depth
        choices: list[int | None] = [j for j in range(p.nb) if j not in used]
        choices.append(None)
        for target in choices:
            g2 = g + _step_cost(p, order, depth, assigned, target)
            used2 = used if target is None else used | {target}
            assigned2 = assigned + (target,)
            if depth + 1 == p.na:
                total = g2 + _completion_cost(p, used2)
                if total <= upper:
                    heapq.heappush(heap, (total, -(depth + 1), next(counter), total, assigned2, used2, True))
                continue
            f2 = g2 + _lower_bound(p, order, depth + 1, used2)
            if f2 <= upper:
                heapq.heappush(heap, (f2, -(depth + 1), next(counter), g2, assigned2, used2, False))
    return result(upper_map, upper, True, expanded)


def ged_to_empty(g: ProcessGraph) -> int:
    return len(g.nodes) + len(g.edges)


def r_ged(reference: ProcessGraph, generated: ProcessGraph, budget: SearchBudget = DEFAULT_BUDGET) -> RGedScore:
    """1 - GED(ref, gen) / (GED(ref, empty) + GED(gen, empty)); two empty graphs score 1."""
    denominator = ged_to_empty(reference) + ged_to_empty(generated)
    if denominator == 0:
        return RGedScore(1.0)
    res = ged(reference, generated, budget)
    value = 1.0 - res.cost / denominator
    return RGedScore(min(1.0, max(0.0, value)), res.exact)
