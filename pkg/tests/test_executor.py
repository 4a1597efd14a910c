from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgenum.compiler import optimize_batch_plan
from sgenum.executor import (
    EngineConfig,
    MatchSink,
    SearchTask,
    enumerate_matches,
    expand_compressed,
    generate_tasks,
    intersect_sorted,
)
from sgenum.generators import connected_patterns, erdos_renyi, hub_graph
from sgenum.graph import PatternGraph, TotalOrder, UndirectedGraph
from sgenum.oracle import brute_force_enumerate, canonical

PATTERNS = connected_patterns(5, min_n=2)
TRIANGLE = PatternGraph(3, ((1, 2), (2, 3), (1, 3))).with_symmetry_breaking()


def _subgraphs(p, items):
    return [canonical(p, f) for f in items]


@settings(max_examples=200, deadline=None)
@given(a=st.sets(st.integers(0, 3000), max_size=300), b=st.sets(st.integers(0, 3000), max_size=40))
def test_intersect_sorted_matches_sets(a, b):
    assert intersect_sorted(sorted(a), sorted(b)) == tuple(sorted(a & b))
    assert intersect_sorted(sorted(b), sorted(a)) == tuple(sorted(a & b))


def test_task_split_counts():
    g = hub_graph(1300, 1200, 0.5, 3)
    plan = optimize_batch_plan(TRIANGLE, [1, 2, 3])
    hub_tasks = [t for t in generate_tasks(g, plan, TRIANGLE, 500) if t.start == 0]
    assert len(hub_tasks) == 3
    slices = [(t.lo, t.hi) for t in hub_tasks]
    nbrs = g.neighbors(0)
    assert slices[0][0] == nbrs[0] and slices[-1][1] == nbrs[-1]
    # slices partition the hub's neighbors
    owners = [sum(t.admits(w) for t in hub_tasks) for w in nbrs]
    assert owners == [1] * len(nbrs)
    assert [t for t in generate_tasks(g, plan, TRIANGLE, None) if t.start == 0] == [SearchTask(0)]
    with pytest.raises(ValueError):
        list(generate_tasks(g, plan, TRIANGLE, 0))


def test_split_threshold_boundary():
    g = UndirectedGraph.from_edges([(0, k) for k in range(1, 6)])
    plan = optimize_batch_plan(TRIANGLE, [1, 2, 3])
    at_theta = [t for t in generate_tasks(g, plan, TRIANGLE, 5) if t.start == 0]
    assert at_theta == [SearchTask(0, 1, 5)]
    assert sum(t.start == 0 for t in generate_tasks(g, plan, TRIANGLE, 6)) == 1
    assert sum(t.start == 0 for t in generate_tasks(g, plan, TRIANGLE, 2)) == 3


def test_toy_graph_six_vertex(toy_graph, six_vertex):
    p, order = six_vertex
    r = enumerate_matches(p, toy_graph, EngineConfig(sink="emit", order=order))
    assert sorted(r.items) == [(1, 2, 3, 4, 5, 8), (1, 7, 2, 3, 4, 5)]
    assert r.count == 2
    assert set(_subgraphs(p, r.items)) == brute_force_enumerate(p, toy_graph)


def test_toy_graph_compressed(toy_graph, six_vertex):
    p, order = six_vertex
    r = enumerate_matches(p, toy_graph, EngineConfig(sink="emit", order=order, vcbc=True))
    assert r.sink.mode == "emit-compressed"
    assert r.count == 2
    dorder = TotalOrder.degree_based(toy_graph)
    full = sorted(f for code in r.items for f in expand_compressed(code, r.plan, dorder))
    assert full == [(1, 2, 3, 4, 5, 8), (1, 7, 2, 3, 4, 5)]
    assert r.sink.format_item(r.items[0]).startswith("1 [")


def test_toy_graph_triangles(toy_graph):
    r = enumerate_matches(TRIANGLE, toy_graph, EngineConfig(sink="emit"))
    assert sorted(tuple(sorted(f)) for f in r.items) == [(1, 2, 3), (1, 2, 7), (1, 3, 4), (1, 4, 5), (1, 5, 8)]


@settings(max_examples=40, deadline=None)
@given(idx=st.integers(0, len(PATTERNS) - 1), seed=st.integers(0, 10**6), theta=st.sampled_from([1, 2, 5, None]),
       workers=st.sampled_from([1, 3]))
def test_engine_matches_oracle(idx, seed, theta, workers):
    p = PATTERNS[idx]
    g = erdos_renyi(25, 5, seed)
    r = enumerate_matches(p, g, EngineConfig(sink="emit", theta=theta, workers=workers, shadow_trc=True))
    got = _subgraphs(p, r.items)
    assert len(got) == len(set(got))
    assert set(got) == brute_force_enumerate(p, g)
    assert r.count == len(got)


@settings(max_examples=30, deadline=None)
@given(idx=st.integers(0, len(PATTERNS) - 1), seed=st.integers(0, 10**6), data=st.data())
def test_compressed_expansion_matches_oracle(idx, seed, data):
    p = PATTERNS[idx]
    order = data.draw(st.permutations(list(p.vertices)))
    g = erdos_renyi(20, 5, seed)
    r = enumerate_matches(p, g, EngineConfig(sink="emit", order=order, vcbc=True, theta=3))
    dorder = TotalOrder.degree_based(g)
    full = [f for code in r.items for f in expand_compressed(code, r.plan, dorder)]
    assert len(full) == r.count
    assert sorted(_subgraphs(p, full)) == sorted(brute_force_enumerate(p, g))


def test_counters_and_metrics(six_vertex):
    p, order = six_vertex
    g = erdos_renyi(60, 8, 2)
    r = enumerate_matches(p, g, EngineConfig(order=order, cache_bytes=0))
    m = r.metrics
    assert m.cache_hits == 0 and m.backend_queries == m.dbq_issued == r.counters.dbq_execs
    assert 0 < r.counters.trc_hits < r.counters.trc_execs
    assert r.counters.res == r.count
    assert r.tasks == g.num_vertices
    summary = r.summary()
    assert summary["matches"] == r.count and summary["dbq_issued"] == m.dbq_issued


def test_triangle_cache_hits_are_counted(six_vertex):
    p, order = six_vertex
    g = erdos_renyi(60, 8, 2)
    with_trc = enumerate_matches(p, g, EngineConfig(order=order, shadow_trc=True))
    without = enumerate_matches(p, g, EngineConfig(order=order, triangle_cache=False))
    assert with_trc.count == without.count
    assert with_trc.counters.trc_hits > 0
    assert with_trc.counters.intersections < without.counters.intersections


def test_sink_modes():
    with pytest.raises(ValueError):
        MatchSink("print")
    s = MatchSink("count")
    s.report((1, 2))
    assert (s.total, s.items) == (1, [])


def test_empty_graph_and_isolated_vertices():
    g = UndirectedGraph.from_edges([], [1, 2, 3])
    r = enumerate_matches(TRIANGLE, g)
    assert r.count == 0
    assert enumerate_matches(PatternGraph(1, ()), g).count == 3


def test_batch_rejects_directed_pattern():
    with pytest.raises(ValueError):
        enumerate_matches(PatternGraph(2, ((1, 2),), directed=True), erdos_renyi(5, 2, 0))
