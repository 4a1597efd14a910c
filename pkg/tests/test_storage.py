from __future__ import annotations

import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgenum.generators import random_directed, random_update_batches
from sgenum.graph import DirectedGraph, UndirectedGraph
from sgenum.storage import (
    AdjacencyCache,
    CommMetrics,
    ConsistencyError,
    InMemoryStore,
    SnapshotQuad,
    StreamEntry,
    apply_delta_sets,
    cached_get,
    graph_bytes,
    merge_post_step,
    snapshot_edges,
    store_batch_graph,
    store_snapshot_graph,
)
from sgenum.streaming import delta_adjacency_sets


def test_lru_evicts_least_recent():
    c = AdjacencyCache(200)
    c.insert(1, "a", 80)
    c.insert(2, "b", 80)
    assert c.lookup(1) == "a"
    c.insert(3, "c", 80)
    assert 2 not in c and 1 in c and 3 in c
    assert c.used == 160
    assert c.evictions == 1


def test_cache_skips_oversized_and_replaces():
    c = AdjacencyCache(100)
    c.insert(1, "big", 101)
    assert len(c) == 0
    c.insert(1, "x", 40)
    c.insert(1, "y", 50)
    assert c.lookup(1) == "y" and c.used == 50
    with pytest.raises(ValueError):
        AdjacencyCache(-1)


@settings(max_examples=50, deadline=None)
@given(cap=st.integers(0, 400), ops=st.lists(st.tuples(st.integers(0, 9), st.integers(1, 150)), max_size=60))
def test_cache_never_exceeds_budget(cap, ops):
    c = AdjacencyCache(cap)
    for key, size in ops:
        c.insert(key, key, size)
        assert c.used <= cap
        assert c.used == sum(s for _, s in c._entries.values())


def test_batch_get_counts_hits_and_misses():
    g = UndirectedGraph.from_edges([(1, 2), (1, 3)])
    store = InMemoryStore()
    store_batch_graph(g, store)
    cache = AdjacencyCache(graph_bytes(g))
    m = CommMetrics()
    for v in (1, 2, 1, 1, 3, 2):
        cached_get(v, store, cache, m)
    assert (m.dbq_issued, m.backend_queries, m.cache_hits) == (6, 3, 3)
    assert m.bytes_fetched == graph_bytes(g)
    assert store.reads == 3
    assert m.hit_rate == 0.5


def test_full_capacity_fetches_each_key_once():
    g = UndirectedGraph.from_edges([(a, b) for a in range(10) for b in range(a + 1, 10) if (a * b) % 3])
    store = InMemoryStore()
    store_batch_graph(g, store)
    cache = AdjacencyCache(graph_bytes(g))
    m = CommMetrics()
    threads = [threading.Thread(target=lambda: [cached_get(v, store, cache, m) for v in g.vertices * 5])
               for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert m.dbq_issued == 4 * 5 * g.num_vertices
    assert m.backend_queries + m.cache_hits == m.dbq_issued
    # concurrent first touches may each miss, never more than once per worker
    assert g.num_vertices <= m.backend_queries <= 4 * g.num_vertices


def test_store_text_round_trip():
    store = InMemoryStore()
    store.put(3, (1, 2))
    store.put(1, SnapshotQuad((2,), (3, 4), (("+", 5),), (("-", 3), ("+", 7))))
    store.put(2, ())
    text = store.dumps()
    assert text == "1\tQ|2|3,4|+5|-3,+7\n2\tA|\n3\tA|1,2\n"
    assert InMemoryStore.load(text).dumps() == text


def test_stream_entry_views():
    q = SnapshotQuad(in_prev=(), out_prev=(2, 3, 5), delta_in=(), delta_out=(("+", 4), ("-", 5)))
    e = StreamEntry.from_quad(1, q)
    assert e.out_cur == (2, 3, 4)
    assert e.select("delta", "out", "*") == (("+", 4), ("-", 5))
    assert e.select("either", "out", "+") == (2, 3, 4)
    assert e.select("either", "out", "-") == (2, 3, 5)
    assert e.select("unaltered", "out", "+") == (2, 3)
    assert e.select("unaltered", "out", "-") == (2, 3)
    assert e.select("delta", "out", "+") == (4,)
    assert e.select("either", "in", "+") == ()


def test_streaming_cache_refreshes_on_new_step():
    store = InMemoryStore()
    store_snapshot_graph(DirectedGraph.from_edges([(1, 2)]), store)
    cache = AdjacencyCache(1 << 20)
    m = CommMetrics()
    assert cached_get(1, store, cache, m, "either", "out", "+", 1) == (2,)
    assert cached_get(1, store, cache, m, "either", "out", "-", 1) == (2,)
    assert m.cache_hits == 1
    store.put(1, SnapshotQuad((), (2,), (), (("+", 3),)))
    assert cached_get(1, store, cache, m, "either", "out", "+", 2) == (2, 3)
    assert m.backend_queries == 2


def test_apply_delta_sets_is_all_or_nothing():
    g = DirectedGraph.from_edges([(1, 2), (2, 3)])
    store = InMemoryStore()
    store_snapshot_graph(g, store)
    before = store.dumps()
    bad = {1: ((), (("+", 3),)), 3: ((("+", 1), ("-", 2)), ())}
    with pytest.raises(ConsistencyError, match="insert existing edge|delete absent edge"):
        apply_delta_sets(store, {**bad, 2: ((), (("+", 3),))})
    assert store.dumps() == before
    with pytest.raises(ConsistencyError, match=r"cannot delete absent edge \(1, 3\)"):
        apply_delta_sets(store, {1: ((), (("-", 3),))})
    with pytest.raises(ConsistencyError, match="twice"):
        apply_delta_sets(store, {1: ((), (("+", 3), ("-", 3)))})
    assert store.dumps() == before


def test_apply_writes_only_touched_keys():
    g = random_directed(30, 90, 4)
    store = InMemoryStore()
    store_snapshot_graph(g, store)
    batch = random_update_batches(g, 1, 10, 5)[0]
    delta = delta_adjacency_sets(batch)
    w0 = store.writes
    assert apply_delta_sets(store, delta) == len(delta)
    assert store.writes - w0 == len(delta)
    assert all(store.get(v).form == 2 for v in delta)
    with pytest.raises(ConsistencyError):
        apply_delta_sets(store, delta)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), steps=st.integers(1, 12), size=st.integers(1, 15))
def test_snapshot_round_trip(seed, steps, size):
    g = random_directed(20, 50, seed)
    store = InMemoryStore()
    store_snapshot_graph(g, store)
    arcs = set(g.edges())
    for batch in random_update_batches(g, steps, size, seed + 1):
        delta = delta_adjacency_sets(batch)
        apply_delta_sets(store, delta)
        merge_post_step(store, delta)
        arcs = batch.apply(arcs)
    direct = InMemoryStore()
    store_snapshot_graph(DirectedGraph.from_edges(arcs, g.vertices), direct)
    assert store.dumps() == direct.dumps()
    assert snapshot_edges(store) == arcs
