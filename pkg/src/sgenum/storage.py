"""Key-value adjacency storage, two-form snapshot values and the shared cache.

Batch values are sorted adjacency tuples.  Snapshot values are quads
``(in_prev, out_prev, delta_in, delta_out)``; a quad with empty deltas is in
form 1 and holds the current snapshot, otherwise it is in form 2 and holds
the previous snapshot plus the step's flagged changes.
"""

from __future__ import annotations

import threading
import time
from abc import ABC, abstractmethod
from bisect import bisect_left
from collections import OrderedDict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Any, TextIO

from .graph import DirectedGraph, UndirectedGraph

__all__ = [
    "ConsistencyError",
    "GraphStore",
    "InMemoryStore",
    "SnapshotQuad",
    "DeltaSets",
    "store_batch_graph",
    "store_snapshot_graph",
    "apply_delta_sets",
    "merge_post_step",
    "snapshot_edges",
    "CommMetrics",
    "StreamEntry",
    "AdjacencyCache",
    "cached_get",
    "ENTRY_OVERHEAD",
    "ID_BYTES",
    "graph_bytes",
]

ENTRY_OVERHEAD = 64
ID_BYTES = 8


class ConsistencyError(ValueError):
    """An update disagrees with the stored snapshot."""


class GraphStore(ABC):
    """Minimal keyed get/put service."""

    @abstractmethod
    def get(self, key: int) -> Any | None: ...

    @abstractmethod
    def put(self, key: int, value: Any) -> None: ...

    @abstractmethod
    def keys(self) -> list[int]: ...

    def get_many(self, keys: Iterable[int]) -> dict[int, Any]:
        return {k: self.get(k) for k in keys}

    def put_many(self, items: Mapping[int, Any]) -> None:
        for k, v in items.items():
            self.put(k, v)


class InMemoryStore(GraphStore):
    """Ordered in-process map with optional artificial per-get latency."""

    def __init__(self, latency_us: float = 0.0):
        self._data: dict[int, Any] = {}
        self._lock = threading.Lock()
        self.latency_us = latency_us
        self.reads = 0
        self.writes = 0

    def get(self, key: int):
        if self.latency_us:
            time.sleep(self.latency_us / 1e6)
        with self._lock:
            self.reads += 1
        return self._data.get(key)

    def put(self, key: int, value) -> None:
        with self._lock:
            self.writes += 1
            self._data[key] = value

    def keys(self) -> list[int]:
        return sorted(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def dump(self, out: TextIO) -> None:
        """Text lines ``key<TAB>value`` in key order; stable byte for byte."""
        for k in self.keys():
            out.write(f"{k}\t{_encode(self._data[k])}\n")

    def dumps(self) -> str:
        import io
        buf = io.StringIO()
        self.dump(buf)
        return buf.getvalue()

    @classmethod
    def load(cls, stream: TextIO | str) -> InMemoryStore:
        store = cls()
        lines = stream.splitlines() if isinstance(stream, str) else stream
        for line in lines:
            line = line.rstrip("\n")
            if line:
                key, _, value = line.partition("\t")
                store._data[int(key)] = _decode(value)
        return store


def _ids(xs) -> str:
    return ",".join(map(str, xs))


def _flagged(xs) -> str:
    return ",".join(f"{op}{w}" for op, w in xs)


def _encode(value) -> str:
    if isinstance(value, SnapshotQuad):
        return "Q|" + "|".join((_ids(value.in_prev), _ids(value.out_prev),
                                _flagged(value.delta_in), _flagged(value.delta_out)))
    return "A|" + _ids(value)


def _decode(text: str):
    tag, _, body = text.partition("|")

    def ids(s):
        return tuple(int(x) for x in s.split(",") if x)

    def flagged(s):
        return tuple((x[0], int(x[1:])) for x in s.split(",") if x)

    if tag == "A":
        return ids(body)
    parts = body.split("|")
    return SnapshotQuad(ids(parts[0]), ids(parts[1]), flagged(parts[2]), flagged(parts[3]))


@dataclass(frozen=True)
class SnapshotQuad:
    in_prev: tuple[int, ...]
    out_prev: tuple[int, ...]
    delta_in: tuple[tuple[str, int], ...] = ()
    delta_out: tuple[tuple[str, int], ...] = ()

    @property
    def form(self) -> int:
        return 1 if not self.delta_in and not self.delta_out else 2

    def current(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return _merge(self.in_prev, self.delta_in), _merge(self.out_prev, self.delta_out)


def _merge(prev: tuple[int, ...], delta: Iterable[tuple[str, int]]) -> tuple[int, ...]:
    out = set(prev)
    for op, w in delta:
        if op == "+":
            out.add(w)
        else:
            out.discard(w)
    return tuple(sorted(out))


# vertex -> (delta_in, delta_out), each a sorted tuple of (op, neighbor)
DeltaSets = dict[int, tuple[tuple[tuple[str, int], ...], tuple[tuple[str, int], ...]]]


def store_batch_graph(g: UndirectedGraph, store: GraphStore) -> int:
    """One key per vertex holding its sorted adjacency; returns keys written."""
    for v in g.vertices:
        store.put(v, tuple(g.neighbors(v)))
    return g.num_vertices


def store_snapshot_graph(g: DirectedGraph, store: GraphStore) -> int:
    for v in g.vertices:
        store.put(v, SnapshotQuad(tuple(g.in_neighbors(v)), tuple(g.out_neighbors(v))))
    return g.num_vertices


def _check_delta(key: int, prev: tuple[int, ...], delta, direction: str) -> None:
    seen = set()
    for op, w in delta:
        if w in seen:
            raise ConsistencyError(f"vertex {key}: neighbor {w} appears twice in {direction} delta")
        seen.add(w)
        i = bisect_left(prev, w)
        present = i < len(prev) and prev[i] == w
        if op == "-" and not present:
            edge = (key, w) if direction == "out" else (w, key)
            raise ConsistencyError(f"cannot delete absent edge {edge}")
        if op == "+" and present:
            edge = (key, w) if direction == "out" else (w, key)
            raise ConsistencyError(f"cannot insert existing edge {edge}")


def _quad(store: GraphStore, key: int) -> SnapshotQuad:
    value = store.get(key)
    return value if value is not None else SnapshotQuad((), ())


def apply_delta_sets(store: GraphStore, delta: DeltaSets) -> int:
    """Rewrite only the touched keys into form 2; returns writes issued.

    All keys are validated before any write so a bad batch leaves the store
    untouched.
    """
    staged = {}
    for v, (d_in, d_out) in delta.items():
        q = _quad(store, v)
        if q.form != 1:
            raise ConsistencyError(f"vertex {v} already holds deltas")
        _check_delta(v, q.in_prev, d_in, "in")
        _check_delta(v, q.out_prev, d_out, "out")
        staged[v] = SnapshotQuad(q.in_prev, q.out_prev, tuple(d_in), tuple(d_out))
    store.put_many(staged)
    return len(staged)


def merge_post_step(store: GraphStore, delta: DeltaSets) -> int:
    """Fold the deltas of touched keys back into form 1."""
    staged = {}
    for v in delta:
        q = _quad(store, v)
        _check_delta(v, q.in_prev, q.delta_in, "in")
        _check_delta(v, q.out_prev, q.delta_out, "out")
        cur_in, cur_out = q.current()
        staged[v] = SnapshotQuad(cur_in, cur_out)
    store.put_many(staged)
    return len(staged)


def snapshot_edges(store: GraphStore) -> set[tuple[int, int]]:
    """Arc set of the snapshot currently held in form 1 values."""
    edges = set()
    for v in store.keys():
        q = store.get(v)
        for w in q.current()[1]:
            edges.add((v, w))
    return edges


class CommMetrics:
    """Thread-safe DBQ counters.  ``backend_queries + cache_hits == dbq_issued``."""

    def __init__(self):
        self._lock = threading.Lock()
        self.dbq_issued = 0
        self.backend_queries = 0
        self.cache_hits = 0
        self.bytes_fetched = 0

    def record(self, hit: bool, nbytes: int = 0) -> None:
        with self._lock:
            self.dbq_issued += 1
            if hit:
                self.cache_hits += 1
            else:
                self.backend_queries += 1
                self.bytes_fetched += nbytes

    @property
    def hit_rate(self) -> float:
        return self.cache_hits / self.dbq_issued if self.dbq_issued else 0.0

    def as_dict(self) -> dict[str, float]:
        return {"dbq_issued": self.dbq_issued, "backend_queries": self.backend_queries,
                "cache_hits": self.cache_hits, "bytes_fetched": self.bytes_fetched,
                "hit_rate": round(self.hit_rate, 6)}


@dataclass(frozen=True)
class StreamEntry:
    """Cached view of one vertex at step ``t``.

    ``*_flags`` map each neighbor of the corresponding list to ``True`` when
    the edge is a delta edge of the step.
    """

    t: int
    in_prev: tuple[int, ...]
    out_prev: tuple[int, ...]
    in_cur: tuple[int, ...]
    out_cur: tuple[int, ...]
    delta_in: tuple[tuple[str, int], ...]
    delta_out: tuple[tuple[str, int], ...]

    @classmethod
    def from_quad(cls, t: int, q: SnapshotQuad) -> StreamEntry:
        cur_in, cur_out = q.current()
        return cls(t, q.in_prev, q.out_prev, cur_in, cur_out, q.delta_in, q.delta_out)

    def nbytes(self) -> int:
        size = len(self.in_prev) + len(self.out_prev) + len(self.in_cur) + len(self.out_cur)
        size += 2 * (len(self.delta_in) + len(self.delta_out))
        return ENTRY_OVERHEAD + ID_BYTES * size

    def select(self, ty: str, direction: str, op: str):
        delta = self.delta_out if direction == "out" else self.delta_in
        if ty == "delta" and op == "*":
            return delta
        if op == "+":
            base = self.out_cur if direction == "out" else self.in_cur
        else:
            base = self.out_prev if direction == "out" else self.in_prev
        if ty == "either" or not delta:
            return base if ty != "delta" else ()
        flagged = {w for _, w in delta}
        if ty == "delta":
            return tuple(w for w in base if w in flagged)
        return tuple(w for w in base if w not in flagged)


def _batch_bytes(value: tuple[int, ...]) -> int:
    return ENTRY_OVERHEAD + ID_BYTES * len(value)


def graph_bytes(g: UndirectedGraph) -> int:
    """Cache bytes needed to hold every adjacency list of ``g``."""
    return sum(_batch_bytes(g.neighbors(v)) for v in g.vertices)


class AdjacencyCache:
    """LRU cache under a byte budget, shared by all workers."""

    def __init__(self, capacity_bytes: int):
        if capacity_bytes < 0:
            raise ValueError("cache capacity must be nonnegative")
        self.capacity = capacity_bytes
        self._entries: OrderedDict[int, tuple[Any, int]] = OrderedDict()
        self._lock = threading.Lock()
        self.used = 0
        self.evictions = 0

    def lookup(self, key: int):
        with self._lock:
            item = self._entries.get(key)
            if item is None:
                return None
            self._entries.move_to_end(key)
            return item[0]

    def insert(self, key: int, value, nbytes: int) -> None:
        with self._lock:
            old = self._entries.pop(key, None)
            if old is not None:
                self.used -= old[1]
            if nbytes > self.capacity:
                return
            while self.used + nbytes > self.capacity and self._entries:
                _, (_, size) = self._entries.popitem(last=False)
                self.used -= size
                self.evictions += 1
            self._entries[key] = (value, nbytes)
            self.used += nbytes

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            self.used = 0

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: int) -> bool:
        return key in self._entries


def cached_get(v: int, store: GraphStore, cache: AdjacencyCache | None, metrics: CommMetrics,
               ty: str | None = None, direction: str | None = None, op: str | None = None, t: int | None = None):
    """Adjacency fetch through the cache.

    Batch mode (``t is None``) returns the sorted adjacency tuple.  Streaming
    mode returns the ``(ty, direction)`` view of snapshot ``t`` (``op='+'``)
    or ``t - 1`` (``op='-'``), or the raw flagged delta list for
    ``('delta', *, '*')``.
    """
    entry = cache.lookup(v) if cache is not None else None
    if t is None:
        if entry is not None:
            metrics.record(True)
            return entry
        value = store.get(v) or ()
        nbytes = _batch_bytes(value)
        metrics.record(False, nbytes)
        if cache is not None:
            cache.insert(v, value, nbytes)
        return value
    if entry is not None and entry.t == t:
        metrics.record(True)
    else:
        entry = StreamEntry.from_quad(t, _quad(store, v))
        metrics.record(False, entry.nbytes())
        if cache is not None:
            cache.insert(v, entry, entry.nbytes())
    return entry.select(ty, direction, op)
