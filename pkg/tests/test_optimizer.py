from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgenum.compiler import generate_raw_plan, optimize_batch_plan
from sgenum.generators import NAMED_DIRECTED, connected_patterns, erdos_renyi, named_pattern
from sgenum.graph import PatternGraph
from sgenum.optimizer import (
    GraphStats,
    SearchStats,
    best_execution_plan,
    best_incremental_plans,
    erdos_renyi_estimator,
    estimate_communication_cost,
    estimate_computation_cost,
    estimate_match_count,
    exhaustive_min_comm_cost,
    syntactic_equivalence_classes,
)

PATTERNS = connected_patterns(5, min_n=2)
STATS = GraphStats(100_000, 1_000_000)


def close(a, b):
    return math.isclose(a, b, rel_tol=1e-9)


def test_estimator_small_cases():
    assert erdos_renyi_estimator(1, 0, STATS) == 100_000
    assert close(erdos_renyi_estimator(2, 1, STATS), 2_000_000)
    assert erdos_renyi_estimator(2, 0, STATS) == 100_000 * 99_999
    assert erdos_renyi_estimator(5, 4, GraphStats(3, 3)) == 0.0


def test_estimate_multiplies_components():
    one_edge = estimate_match_count([1, 2], STATS, [(1, 2)])
    assert close(estimate_match_count([1, 2, 3], STATS, [(1, 2)]), one_edge * 100_000)
    assert estimate_match_count([], STATS) == 0.0


def test_stats_of_directed_graph_projects():
    g = erdos_renyi(30, 4, 1)
    assert GraphStats.of(g) == GraphStats(30, g.num_edges)
    with pytest.raises(ValueError):
        GraphStats(0, 1)


def test_six_vertex_costs(six_vertex):
    p, order = six_vertex
    plan = optimize_batch_plan(p, order)
    assert close(estimate_communication_cost(p, plan, STATS), 42_099_599.99599996)
    assert close(estimate_computation_cost(p, plan, STATS), 124_159_436.76235163)


def test_plan_without_intersections_costs_nothing_to_compute():
    p = PatternGraph(2, ((1, 2),))
    plan = generate_raw_plan(p, [1, 2])
    assert all(i.kind != "INT" for i in plan.instructions)
    assert estimate_computation_cost(p, plan, STATS) == 0.0
    # one DBQ per start vertex
    assert estimate_communication_cost(p, plan, STATS) == 100_000


def test_se_classes():
    star = PatternGraph(4, ((1, 2), (1, 3), (1, 4)))
    assert syntactic_equivalence_classes(star) == [[1], [2, 3, 4]]
    triangle = PatternGraph(3, ((1, 2), (2, 3), (1, 3)))
    assert syntactic_equivalence_classes(triangle) == [[1, 2, 3]]
    in_star = named_pattern("2-in-star")
    assert syntactic_equivalence_classes(in_star) == [[1, 2], [3]]
    # edge 1 is the delta edge of plan 1, so u1 and u2 differ by edge type
    assert syntactic_equivalence_classes(in_star, 1) == [[1], [2], [3]]


@settings(max_examples=40, deadline=None)
@given(idx=st.integers(0, len(PATTERNS) - 1), n=st.integers(10, 10**6), density=st.floats(0.5, 20))
def test_pruned_search_matches_exhaustive(idx, n, density):
    p = PATTERNS[idx]
    stats = GraphStats(n, min(int(n * density), n * (n - 1) // 2))
    _, cost = best_execution_plan(p, stats)
    assert close(cost.comm_cost, exhaustive_min_comm_cost(p, stats))
    _, plain = best_execution_plan(p, stats, dual_pruning=False, cost_pruning=False)
    assert close(plain.comm_cost, cost.comm_cost)


@pytest.mark.parametrize("name", sorted(NAMED_DIRECTED))
def test_incremental_search_matches_exhaustive(name):
    p = named_pattern(name)
    for i, (plan, cost) in enumerate(best_incremental_plans(p, STATS), start=1):
        assert plan.delta_edge == i
        assert plan.order[:2] == p.edges[i - 1]
        assert close(cost.comm_cost, exhaustive_min_comm_cost(p, STATS, i))


def test_search_explores_fraction_of_orders():
    fractions = {}
    for p in PATTERNS:
        s = SearchStats()
        best_execution_plan(p, STATS, search_stats=s)
        assert s.explored_orders <= s.admissible_orders == math.factorial(p.n)
        fractions.setdefault(p.n, []).append(s.explored_fraction)
    means = [sum(v) / len(v) for _, v in sorted(fractions.items())]
    assert all(m < 1 for m in means)
    assert means == sorted(means, reverse=True)


def test_cost_report_text(six_vertex):
    p, _ = six_vertex
    _, cost = best_execution_plan(p, STATS)
    lines = cost.to_text().splitlines()
    assert lines[0].startswith("comm_cost\t")
    assert lines[2] == "order\t" + " ".join(map(str, cost.order))


def test_search_refuses_large_patterns():
    big = PatternGraph(11, tuple((k, k + 1) for k in range(1, 11)))
    with pytest.raises(ValueError):
        best_execution_plan(big, STATS)
