"""Cardinality-based cost model and best matching-order search.

Costs count instruction executions.  Communication cost sums DBQ executions;
computation cost sums INT and TRC executions.  An instruction executes once
per match of the partial pattern graph bound by the enumerating instructions
(INI, ENU, DENU) that precede it.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from itertools import permutations

from .compiler import (
    edge_type,
    generate_incremental_raw_plan,
    generate_raw_plan,
    optimize_batch_plan,
    optimize_incremental_plan,
)
from .graph import DirectedGraph, PatternGraph, UndirectedGraph
from .plan import DBQ, DENU, ENU, INI, INT, TRC, ExecutionPlan

__all__ = [
    "GraphStats",
    "erdos_renyi_estimator",
    "estimate_match_count",
    "estimate_computation_cost",
    "estimate_communication_cost",
    "CostReport",
    "SearchStats",
    "best_execution_plan",
    "best_incremental_plans",
    "exhaustive_min_comm_cost",
    "syntactic_equivalence_classes",
    "REL_TOL",
]

REL_TOL = 1e-9

Estimator = Callable[[int, int, "GraphStats"], float]


def erdos_renyi_estimator(k: int, l: int, stats: GraphStats) -> float:
    """Expected injective matches of a connected k-vertex, l-edge pattern in
    G(N, p) with p matching the observed edge density."""
    n = stats.N
    if k > n:
        return 0.0
    p = 2.0 * stats.M / (n * (n - 1)) if n > 1 else 0.0
    return float(math.perm(n, k)) * p**l


@dataclass(frozen=True)
class GraphStats:
    N: int
    M: int
    estimator: Estimator = field(default=erdos_renyi_estimator, compare=False)

    def __post_init__(self):
        if self.N < 1 or self.M < 0:
            raise ValueError(f"invalid graph statistics N={self.N} M={self.M}")

    @classmethod
    def of(cls, g: UndirectedGraph | DirectedGraph, estimator: Estimator = erdos_renyi_estimator) -> GraphStats:
        if isinstance(g, DirectedGraph):
            g = g.to_undirected()
        return cls(max(g.num_vertices, 1), g.num_edges, estimator)


def _components(vertices: Iterable[int], edges: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    parent = {v: v for v in vertices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    undirected = {(min(a, b), max(a, b)) for a, b in edges}
    for a, b in undirected:
        parent[find(a)] = find(b)
    sizes: dict[int, list[int]] = {}
    for v in parent:
        sizes.setdefault(find(v), [0, 0])[0] += 1
    for a, _ in undirected:
        sizes[find(a)][1] += 1
    return [(k, l) for k, l in sizes.values()]


def estimate_match_count(p, stats: GraphStats, edges: Iterable[tuple[int, int]] | None = None) -> float:
    """Estimated matches of a partial pattern graph.

    ``p`` is a :class:`PatternGraph` or a vertex collection (then ``edges``
    lists its edges).  Direction is ignored; disconnected graphs multiply
    the estimates of their components.
    """
    if isinstance(p, PatternGraph):
        vertices, edges = list(p.vertices), p.edges
    else:
        vertices, edges = list(p), list(edges or ())
    if not vertices:
        return 0.0
    total = 1.0
    for k, l in _components(vertices, edges):
        total *= stats.estimator(k, l, stats)
    return total


class _PartialGraph:
    """Induced subgraph of the pattern on the vertices bound so far."""

    def __init__(self, p: PatternGraph, stats: GraphStats):
        self.p, self.stats = p, stats
        self.vertices: list[int] = []
        self._cache: dict[frozenset, float] = {}

    def add(self, u: int) -> float:
        self.vertices.append(u)
        return self.estimate()

    def estimate(self) -> float:
        key = frozenset(self.vertices)
        if key not in self._cache:
            edges = [(a, b) for a, b in self.p.edges if a in key and b in key]
            self._cache[key] = estimate_match_count(self.vertices, self.stats, edges)
        return self._cache[key]


def _scan_costs(p: PatternGraph, plan: ExecutionPlan, stats: GraphStats) -> tuple[float, float]:
    partial = _PartialGraph(p, stats)
    cur = 0.0
    comm = comp = 0.0
    for ins in plan.instructions:
        if ins.kind in (INI, ENU, DENU):
            cur = partial.add(int(ins.target[1:]))
        elif ins.kind in (INT, TRC):
            comp += cur
        elif ins.kind == DBQ:
            comm += cur
    return comm, comp


def estimate_computation_cost(p: PatternGraph, plan: ExecutionPlan, stats: GraphStats) -> float:
    return _scan_costs(p, plan, stats)[1]


def estimate_communication_cost(p: PatternGraph, plan: ExecutionPlan, stats: GraphStats) -> float:
    return _scan_costs(p, plan, stats)[0]


@dataclass(frozen=True)
class CostReport:
    comm_cost: float
    comp_cost: float
    order: tuple[int, ...]

    def to_text(self) -> str:
        return (f"comm_cost\t{self.comm_cost:.6g}\ncomp_cost\t{self.comp_cost:.6g}\n"
                f"order\t{' '.join(map(str, self.order))}\n")


@dataclass
class SearchStats:
    """Bookkeeping of one search: complete orders reached versus admissible."""

    admissible_orders: int = 0
    explored_orders: int = 0
    estimate_calls: int = 0
    candidates: int = 0

    @property
    def explored_fraction(self) -> float:
        return self.explored_orders / self.admissible_orders if self.admissible_orders else 0.0


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=1e-12)


def syntactic_equivalence_classes(p: PatternGraph, i: int | None = None) -> list[list[int]]:
    """Partition of pattern vertices into SE classes.

    Undirected: ``N(x) - {y} == N(y) - {x}``.  With ``i`` (incremental
    pattern graph ``i`` of a directed pattern) neighborhoods must agree on
    edge direction and on the edge type of every edge.
    """
    if i is None:
        def same(x, y):
            return p.neighbors(x) - {y} == p.neighbors(y) - {x}
    else:
        ids = p.edge_ids

        def signature(x, other):
            sig = set()
            for (a, b), k in ids.items():
                if a == x and b != other:
                    sig.add(("out", b, edge_type(i, k)))
                elif b == x and a != other:
                    sig.add(("in", a, edge_type(i, k)))
            return sig

        def same(x, y):
            return signature(x, y) == signature(y, x)

    classes: list[list[int]] = []
    for u in p.vertices:
        for cls in classes:
            if same(cls[0], u):
                cls.append(u)
                break
        else:
            classes.append([u])
    return classes


def _dual_rank(classes: list[list[int]], exempt: frozenset[int]) -> dict[int, list[int]]:
    """For every vertex, the SE-equivalent lower-indexed vertices that must
    already be placed before it may be chosen."""
    must_follow: dict[int, list[int]] = {}
    for cls in classes:
        members = sorted(u for u in cls if u not in exempt)
        for pos, u in enumerate(members):
            must_follow[u] = members[:pos]
    return must_follow


def _dbq_weights_batch(p: PatternGraph) -> Callable[[int, frozenset[int]], int]:
    def weight(u: int, remaining: frozenset[int]) -> int:
        return 1 if p.neighbors(u) & remaining else 0
    return weight


def _incremental_weights(p: PatternGraph, i: int):
    """DBQ counts per placed vertex for incremental pattern graph ``i``.

    A vertex needs one typed/directed adjacency set per distinct
    (type, direction) among edges to not-yet-placed vertices; the second
    vertex additionally needs its out-set for the reverse of the delta edge.
    """
    ids = p.edge_ids
    s, t = p.edges[i - 1]

    def needed(u: int, remaining: frozenset[int]) -> int:
        kinds = set()
        for (a, b), k in ids.items():
            if a == u and b in remaining:
                kinds.add((edge_type(i, k), "out"))
            elif b == u and a in remaining:
                kinds.add((edge_type(i, k), "in"))
        if u == t and (t, s) in ids:
            kinds.add((edge_type(i, ids[(t, s)]), "out"))
        return len(kinds)

    return needed


def _search(p: PatternGraph, stats: GraphStats, prefix: Sequence[int], must_follow: dict[int, list[int]],
            step_cost, search_stats: SearchStats, prune: bool = True) -> tuple[float, list[tuple[int, ...]]]:
    """Backtracking over matching orders extending ``prefix``.

    ``step_cost(order_so_far, remaining, partial)`` returns the communication
    cost added when the last vertex of ``order_so_far`` is placed.
    """
    best = math.inf
    cands: list[tuple[int, ...]] = []
    partial = _PartialGraph(p, stats)
    order: list[int] = []

    def recurse(remaining: frozenset[int], comm: float) -> None:
        nonlocal best, cands
        if not remaining:
            search_stats.explored_orders += 1
            if comm < best and not _close(comm, best):
                best, cands = comm, [tuple(order)]
            elif _close(comm, best):
                cands.append(tuple(order))
            return
        depth = len(order)
        if depth < len(prefix):
            choices = [prefix[depth]]
        else:
            placed = set(order)
            choices = [u for u in sorted(remaining) if all(w in placed for w in must_follow.get(u, ()))]
        for u in choices:
            order.append(u)
            partial.vertices.append(u)
            rest = remaining - {u}
            search_stats.estimate_calls += 1
            added = step_cost(order, rest, partial)
            total = comm + added
            if not (prune and total > best and not _close(total, best)):
                recurse(rest, total)
            partial.vertices.pop()
            order.pop()

    recurse(frozenset(p.vertices), 0.0)
    return best, cands


def _batch_step_cost(p: PatternGraph):
    weight = _dbq_weights_batch(p)

    def step(order, rest, partial):
        w = weight(order[-1], rest)
        return w * partial.estimate() if w else 0.0
    return step


def _incremental_step_cost(p: PatternGraph, i: int):
    needed = _incremental_weights(p, i)
    s, t = p.edges[i - 1]

    def step(order, rest, partial):
        depth = len(order)
        if depth == 1:
            return partial.estimate()  # raw delta out-set of the first vertex
        if depth == 2:
            # typed sets of both prefix vertices are fetched after DeltaENU binds the second
            return (needed(s, rest) + needed(t, rest)) * partial.estimate()
        w = needed(order[-1], rest)
        return w * partial.estimate() if w else 0.0
    return step


def _pick_by_comp(p, stats, cands, build) -> tuple[ExecutionPlan, CostReport]:
    best_plan, best_report = None, None
    for order in cands:
        plan = build(order)
        comm, comp = _scan_costs(p, plan, stats)
        if best_report is None or (comp < best_report.comp_cost and not _close(comp, best_report.comp_cost)):
            best_plan, best_report = plan, CostReport(comm, comp, tuple(order))
    return best_plan, best_report


def best_execution_plan(p: PatternGraph, stats: GraphStats, *, dual_pruning: bool = True, cost_pruning: bool = True,
                        search_stats: SearchStats | None = None,
                        **opts) -> tuple[ExecutionPlan, CostReport]:
    """Least communication cost plan, ties broken by computation cost.

    ``opts`` are forwarded to :func:`optimize_batch_plan`.
    """
    if p.n > 10:
        raise ValueError("best-plan search supports patterns with at most 10 vertices")
    st = search_stats if search_stats is not None else SearchStats()
    st.admissible_orders = math.factorial(p.n)
    must = _dual_rank(syntactic_equivalence_classes(p), frozenset()) if dual_pruning else {}
    _, cands = _search(p, stats, (), must, _batch_step_cost(p), st, cost_pruning)
    st.candidates = len(cands)
    return _pick_by_comp(p, stats, cands, lambda o: optimize_batch_plan(p, o, **opts))


def _incremental_prefix(p: PatternGraph, i: int) -> tuple[int, int]:
    return p.edges[i - 1]


def best_incremental_plans(p: PatternGraph, stats: GraphStats, *, dual_pruning: bool = True,
                           cost_pruning: bool = True,
                           search_stats: list[SearchStats] | None = None) -> list[tuple[ExecutionPlan, CostReport]]:
    """One best plan per incremental pattern graph, in edge order."""
    if not p.directed:
        raise ValueError("incremental plans need a directed pattern")
    result = []
    for i in range(1, p.m + 1):
        prefix = _incremental_prefix(p, i)
        st = SearchStats(admissible_orders=math.factorial(p.n - 2))
        must = _dual_rank(syntactic_equivalence_classes(p, i), frozenset(prefix)) if dual_pruning else {}
        _, cands = _search(p, stats, prefix, must, _incremental_step_cost(p, i), st, cost_pruning)
        st.candidates = len(cands)
        if search_stats is not None:
            search_stats.append(st)
        result.append(_pick_by_comp(p, stats, cands, lambda o, i=i: optimize_incremental_plan(p, i, o)))
    return result


def exhaustive_min_comm_cost(p: PatternGraph, stats: GraphStats, i: int | None = None) -> float:
    """Reference minimum over every admissible order, costing raw plans."""
    best = math.inf
    if i is None:
        orders = permutations(p.vertices)
    else:
        s, t = _incremental_prefix(p, i)
        rest = [u for u in p.vertices if u not in (s, t)]
        orders = ((s, t) + perm for perm in permutations(rest))
    for order in orders:
        plan = generate_raw_plan(p, order) if i is None else generate_incremental_raw_plan(p, i, order)
        best = min(best, estimate_communication_cost(p, plan, stats))
    return best
