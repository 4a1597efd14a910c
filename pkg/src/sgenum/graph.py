"""Graph representations, vertex orders and symmetry-breaking constraints.

Data graphs are keyed by their original (nonnegative integer) vertex ids, so
sparse or non-consecutive id spaces need no renumbering.  Pattern vertices are
always numbered ``1..n`` so that plan variables read ``f1``, ``A3`` and so on.
"""

from __future__ import annotations

import io
import re
from bisect import bisect_left
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from typing import TextIO, Union

__all__ = [
    "GraphFormatError",
    "CapabilityError",
    "UndirectedGraph",
    "DirectedGraph",
    "PatternGraph",
    "TotalOrder",
    "load_edge_list",
    "induced_subgraph",
    "compute_automorphisms",
    "symmetry_breaking_conditions",
    "load_pattern",
    "dump_pattern",
]

MAX_AUTOMORPHISM_VERTICES = 12


class GraphFormatError(ValueError):
    """Malformed graph or pattern text."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CapabilityError(RuntimeError):
    """Raised when an input exceeds a guarded brute-force limit."""


def _sorted_unique(values: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(set(values)))


@dataclass(frozen=True)
class UndirectedGraph:
    """Simple undirected graph stored as sorted adjacency tuples."""

    adjacency: dict[int, tuple[int, ...]]

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], vertices: Iterable[int] = ()) -> UndirectedGraph:
        adj: dict[int, set[int]] = {v: set() for v in vertices}
        for a, b in edges:
            if a == b:
                continue
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
        return cls({v: tuple(sorted(ns)) for v, ns in sorted(adj.items())})

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(self.adjacency)

    @property
    def num_vertices(self) -> int:
        return len(self.adjacency)

    @property
    def num_edges(self) -> int:
        return sum(len(ns) for ns in self.adjacency.values()) // 2

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency.get(v, ())

    def degree(self, v: int) -> int:
        return len(self.adjacency.get(v, ()))

    def has_edge(self, a: int, b: int) -> bool:
        ns = self.adjacency.get(a, ())
        i = bisect_left(ns, b)
        return i < len(ns) and ns[i] == b

    def edges(self) -> Iterator[tuple[int, int]]:
        for v, ns in self.adjacency.items():
            for w in ns:
                if v < w:
                    yield v, w


@dataclass(frozen=True)
class DirectedGraph:
    """Simple directed graph with sorted in/out adjacency tuples."""

    adjacency_out: dict[int, tuple[int, ...]]
    adjacency_in: dict[int, tuple[int, ...]]

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], vertices: Iterable[int] = ()) -> DirectedGraph:
        out: dict[int, set[int]] = {v: set() for v in vertices}
        inc: dict[int, set[int]] = {v: set() for v in vertices}
        for a, b in edges:
            if a == b:
                continue
            out.setdefault(a, set()).add(b)
            inc.setdefault(b, set()).add(a)
            out.setdefault(b, set())
            inc.setdefault(a, set())
        keys = sorted(set(out) | set(inc))
        return cls(
            {v: tuple(sorted(out.get(v, ()))) for v in keys},
            {v: tuple(sorted(inc.get(v, ()))) for v in keys},
        )

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(self.adjacency_out)

    @property
    def num_vertices(self) -> int:
        return len(self.adjacency_out)

    @property
    def num_edges(self) -> int:
        return sum(len(ns) for ns in self.adjacency_out.values())

    def out_neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency_out.get(v, ())

    def in_neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency_in.get(v, ())

    def has_edge(self, a: int, b: int) -> bool:
        ns = self.adjacency_out.get(a, ())
        i = bisect_left(ns, b)
        return i < len(ns) and ns[i] == b

    def edges(self) -> Iterator[tuple[int, int]]:
        for v, ns in self.adjacency_out.items():
            for w in ns:
                yield v, w

    def to_undirected(self) -> UndirectedGraph:
        return UndirectedGraph.from_edges(self.edges(), self.vertices)


Graph = Union[UndirectedGraph, DirectedGraph]


@dataclass(frozen=True)
class PatternGraph:
    """Small query graph over vertices ``1..n``.

    ``edges[k - 1]`` is edge ``e_k``; the list order is the stable edge
    numbering used by incremental pattern graphs.  ``partial_order`` holds
    pairs ``(i, j)`` meaning ``u_i < u_j``.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    directed: bool = False
    partial_order: frozenset[tuple[int, int]] = frozenset()
    _adj: dict[int, frozenset[int]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise GraphFormatError("pattern needs at least one vertex")
        seen = set()
        for a, b in self.edges:
            if not (1 <= a <= self.n and 1 <= b <= self.n):
                raise GraphFormatError(f"edge ({a}, {b}) outside vertices 1..{self.n}")
            if a == b:
                raise GraphFormatError(f"self-loop on u{a}")
            key = (a, b) if self.directed else (min(a, b), max(a, b))
            if key in seen:
                raise GraphFormatError(f"duplicate edge ({a}, {b})")
            seen.add(key)
        adj: dict[int, set[int]] = {u: set() for u in range(1, self.n + 1)}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        object.__setattr__(self, "_adj", {u: frozenset(ns) for u, ns in adj.items()})
        if not self._connected():
            raise GraphFormatError("pattern graph must be connected")
        if _has_cycle(self.n, self.partial_order):
            raise GraphFormatError("partial order contains a cycle")

    def _connected(self) -> bool:
        seen = {1}
        stack = [1]
        while stack:
            u = stack.pop()
            for w in self._adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def vertices(self) -> range:
        return range(1, self.n + 1)

    def neighbors(self, u: int) -> frozenset[int]:
        """Neighbors of ``u`` ignoring edge direction."""
        return self._adj[u]

    def adjacent(self, a: int, b: int) -> bool:
        return b in self._adj[a]

    def has_edge(self, a: int, b: int) -> bool:
        if self.directed:
            return (a, b) in self.edge_ids
        return self.adjacent(a, b)

    @property
    def edge_ids(self) -> dict[tuple[int, int], int]:
        return {e: k for k, e in enumerate(self.edges, start=1)}

    def out_neighbors(self, u: int) -> list[int]:
        return [b for a, b in self.edges if a == u]

    def in_neighbors(self, u: int) -> list[int]:
        return [a for a, b in self.edges if b == u]

    def with_partial_order(self, constraints: Iterable[tuple[int, int]]) -> PatternGraph:
        return PatternGraph(self.n, self.edges, self.directed, frozenset(constraints))

    def with_symmetry_breaking(self) -> PatternGraph:
        return self.with_partial_order(symmetry_breaking_conditions(self))

    def as_undirected(self) -> PatternGraph:
        if not self.directed:
            return self
        pairs: list[tuple[int, int]] = []
        seen = set()
        for a, b in self.edges:
            key = (min(a, b), max(a, b))
            if key not in seen:
                seen.add(key)
                pairs.append(key)
        return PatternGraph(self.n, tuple(pairs), False, self.partial_order)


def _has_cycle(n: int, constraints: Iterable[tuple[int, int]]) -> bool:
    succ: dict[int, list[int]] = {}
    for a, b in constraints:
        succ.setdefault(a, []).append(b)
    state = dict.fromkeys(range(1, n + 1), 0)
    for root in range(1, n + 1):
        if state[root]:
            continue
        stack = [(root, iter(succ.get(root, ())))]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
            elif state.get(nxt, 0) == 1:
                return True
            elif state.get(nxt, 0) == 0:
                state[nxt] = 1
                stack.append((nxt, iter(succ.get(nxt, ()))))
    return False


class TotalOrder:
    """Strict total order over data vertices.

    ``degree`` orders by ``(degree, id)``; ``id`` is the natural id order.
    """

    def __init__(self, kind: str, rank: dict[int, int] | None = None):
        if kind not in ("degree", "id"):
            raise ValueError(f"unknown total order kind {kind!r}")
        self.kind = kind
        self.rank = rank

    @classmethod
    def degree_based(cls, g: UndirectedGraph) -> TotalOrder:
        ordered = sorted(g.vertices, key=lambda v: (g.degree(v), v))
        return cls("degree", {v: i for i, v in enumerate(ordered)})

    @classmethod
    def id_based(cls) -> TotalOrder:
        return cls("id")

    def key(self, v: int) -> int:
        return v if self.rank is None else self.rank[v]

    def precedes(self, a: int, b: int) -> bool:
        return self.key(a) < self.key(b)


_EDGE_LINE = re.compile(r"^\s*(\S+)\s+(\S+)\s*$")


def _parse_edge_lines(stream: Iterable[str]) -> Iterator[tuple[int, int]]:
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"expected 'src dst', got {line!r}", lineno)
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"non-integer vertex id in {line!r}", lineno) from None
        if a < 0 or b < 0:
            raise GraphFormatError(f"negative vertex id in {line!r}", lineno)
        yield a, b


def load_edge_list(source: TextIO | str, directed: bool = False) -> Graph:
    """Parse whitespace-separated ``src dst`` lines into a simple graph.

    Duplicates collapse, self-loops are dropped and undirected input is
    symmetrized.  ``source`` may be an open text stream or a string.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    edges = list(_parse_edge_lines(source))
    vertices = {v for e in edges for v in e}
    if directed:
        return DirectedGraph.from_edges(edges, vertices)
    return UndirectedGraph.from_edges(edges, vertices)


def induced_subgraph(g: Graph, vertex_set: Iterable[int]) -> Graph:
    keep = set(vertex_set)
    present = [v for v in g.vertices if v in keep]
    edges = [(a, b) for a, b in g.edges() if a in keep and b in keep]
    return type(g).from_edges(edges, present)


def compute_automorphisms(p: PatternGraph) -> list[tuple[int, ...]]:
    """All edge-preserving permutations of ``p``.

    A permutation is returned as a tuple ``pi`` with ``pi[u - 1]`` the image
    of ``u``.  Exhaustive backtracking with adjacency pruning.
    """
    n = p.n
    if n > MAX_AUTOMORPHISM_VERTICES:
        raise CapabilityError(f"automorphism search limited to {MAX_AUTOMORPHISM_VERTICES} vertices, got {n}")
    arcs = set(p.edges)
    if not p.directed:
        arcs |= {(b, a) for a, b in p.edges}
    degree = {u: (len(p.out_neighbors(u)), len(p.in_neighbors(u))) if p.directed else len(p.neighbors(u))
              for u in p.vertices}
    image: dict[int, int] = {}
    used: set[int] = set()
    result: list[tuple[int, ...]] = []

    def extend(u: int) -> None:
        if u > n:
            result.append(tuple(image[x] for x in range(1, n + 1)))
            return
        for w in range(1, n + 1):
            if w in used or degree[w] != degree[u]:
                continue
            ok = True
            for x in range(1, u):
                y = image[x]
                if ((x, u) in arcs) != ((y, w) in arcs) or ((u, x) in arcs) != ((w, y) in arcs):
                    ok = False
                    break
            if ok:
                image[u] = w
                used.add(w)
                extend(u + 1)
                used.discard(w)
                del image[u]

    extend(1)
    return result


def symmetry_breaking_conditions(p: PatternGraph) -> frozenset[tuple[int, int]]:
    """Partial-order constraints leaving one match per isomorphic subgraph.

    Repeatedly anchors the vertex with the largest orbit under the remaining
    automorphisms (ties: higher degree, then lower id), requires it to precede
    every other member of its orbit, and restricts to its stabilizer.
    """
    group = compute_automorphisms(p)
    constraints: set[tuple[int, int]] = set()
    while len(group) > 1:
        orbits = {u: {pi[u - 1] for pi in group} for u in p.vertices}
        anchor = min(p.vertices, key=lambda u: (-len(orbits[u]), -len(p.neighbors(u)), u))
        for w in sorted(orbits[anchor]):
            if w != anchor:
                constraints.add((anchor, w))
        group = [pi for pi in group if pi[anchor - 1] == anchor]
    return frozenset(constraints)


def _parse_partial(text: str, lineno: int) -> list[tuple[int, int]]:
    pairs = []
    for chunk in re.split(r"[,\s]+", text.strip()):
        if not chunk:
            continue
        m = re.fullmatch(r"u?(\d+)<u?(\d+)", chunk)
        if not m:
            raise GraphFormatError(f"bad partial-order item {chunk!r}", lineno)
        pairs.append((int(m.group(1)), int(m.group(2))))
    return pairs


def load_pattern(source: TextIO | str) -> tuple[PatternGraph, list[int] | None]:
    """Parse the pattern file format.

    Header ``n m [directed|undirected]``, then one ``u v [edge-id]`` line per
    edge, optionally ``order: ...`` and ``partial: a<b, ...`` lines.  Without
    a ``partial:`` line, symmetry-breaking constraints are generated.
    Returns the pattern and the optional matching-order override.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    header = None
    edges: list[tuple[int, int, int | None]] = []
    order = None
    partial = None
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        low = line.lower()
        if low.startswith("order:"):
            try:
                order = [int(x.lstrip("u")) for x in re.split(r"[,\s]+", line[6:].strip()) if x]
            except ValueError:
                raise GraphFormatError(f"bad order line {line!r}", lineno) from None
            continue
        if low.startswith("partial:"):
            partial = _parse_partial(line[8:], lineno)
            continue
        parts = line.split()
        if header is None:
            if len(parts) not in (2, 3):
                raise GraphFormatError(f"bad header {line!r}", lineno)
            try:
                n, m = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"bad header {line!r}", lineno) from None
            flag = parts[2].lower() if len(parts) == 3 else "undirected"
            if flag not in ("directed", "undirected", "1", "0", "true", "false"):
                raise GraphFormatError(f"bad directed flag {parts[2]!r}", lineno)
            header = (n, m, flag in ("directed", "1", "true"))
            continue
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"bad edge line {line!r}", lineno)
        try:
            vals = [int(x.lstrip("u")) for x in parts]
        except ValueError:
            raise GraphFormatError(f"bad edge line {line!r}", lineno) from None
        edges.append((vals[0], vals[1], vals[2] if len(vals) == 3 else None))
    if header is None:
        raise GraphFormatError("missing header line")
    n, m, directed = header
    if len(edges) != m:
        raise GraphFormatError(f"header declares {m} edges, found {len(edges)}")
    if any(e[2] is not None for e in edges):
        if any(e[2] is None for e in edges):
            raise GraphFormatError("edge ids must be given for all edges or none")
        ids = sorted(e[2] for e in edges)
        if ids != list(range(1, m + 1)):
            raise GraphFormatError("edge ids must be consecutive from 1")
        edges.sort(key=lambda e: e[2])
    p = PatternGraph(n, tuple((a, b) for a, b, _ in edges), directed)
    p = p.with_partial_order(partial) if partial is not None else p.with_symmetry_breaking()
    if order is not None and sorted(order) != list(range(1, n + 1)):
        raise GraphFormatError(f"order {order} is not a permutation of 1..{n}")
    return p, order


def dump_pattern(p: PatternGraph, order: list[int] | None = None) -> str:
    lines = [f"{p.n} {p.m} {'directed' if p.directed else 'undirected'}"]
    lines += [f"{a} {b} {k}" for k, (a, b) in enumerate(p.edges, start=1)]
    if order is not None:
        lines.append("order: " + " ".join(map(str, order)))
    lines.append("partial: " + ", ".join(f"{a}<{b}" for a, b in sorted(p.partial_order)))
    return "\n".join(lines) + "\n"
