"""Brute-force ground truth.

Deliberately shares nothing with the compiler or interpreter: plain
backtracking over injective mappings, no symmetry breaking, results
deduplicated through a canonical subgraph form.
"""

from __future__ import annotations

from collections.abc import Iterable

from .graph import CapabilityError, DirectedGraph, PatternGraph, UndirectedGraph

__all__ = ["ORACLE_MAX_VERTICES", "canonical", "brute_force_enumerate", "brute_force_incremental",
           "brute_force_on_edges"]

ORACLE_MAX_VERTICES = 200

Canonical = tuple[tuple[int, ...], tuple[tuple[int, int], ...]]


def canonical(p: PatternGraph, f: Iterable[int]) -> Canonical:
    """Order-independent form of the data subgraph that ``f`` maps ``p`` onto.

    ``f[i]`` is the image of pattern vertex ``i + 1``.
    """
    f = tuple(f)
    if p.directed:
        edges = sorted((f[a - 1], f[b - 1]) for a, b in p.edges)
    else:
        edges = sorted((min(f[a - 1], f[b - 1]), max(f[a - 1], f[b - 1])) for a, b in p.edges)
    return tuple(sorted(f)), tuple(edges)


def brute_force_on_edges(p: PatternGraph, vertices: Iterable[int], arcs: set[tuple[int, int]]) -> set[Canonical]:
    """All subgraphs isomorphic to ``p`` in the graph with the given arcs.

    For undirected ``p`` the arc set must be symmetric.
    """
    verts = sorted(set(vertices))
    if len(verts) > ORACLE_MAX_VERTICES:
        raise CapabilityError(f"oracle limited to {ORACLE_MAX_VERTICES} data vertices, got {len(verts)}")
    nbrs: dict[int, set[int]] = {v: set() for v in verts}
    for a, b in arcs:
        nbrs.setdefault(a, set()).add(b)
        nbrs.setdefault(b, set()).add(a)
    # visit pattern vertices so each one after the first touches an earlier one
    seq = [1]
    while len(seq) < p.n:
        for u in p.vertices:
            if u not in seq and any(p.adjacent(u, w) for w in seq):
                seq.append(u)
                break
    need = {u: [(a, b) for a, b in p.edges if u in (a, b) and (a if b == u else b) in seq[:seq.index(u)]]
            for u in seq}
    results: set[Canonical] = set()
    image: dict[int, int] = {}

    def ok(u: int, v: int) -> bool:
        for a, b in need[u]:
            x = v if a == u else image[a]
            y = v if b == u else image[b]
            if (x, y) not in arcs:
                return False
        return True

    def extend(depth: int) -> None:
        if depth == len(seq):
            results.add(canonical(p, (image[u] for u in p.vertices)))
            return
        u = seq[depth]
        if depth == 0:
            pool = verts
        else:
            anchor = next(w for w in seq[:depth] if p.adjacent(u, w))
            pool = nbrs.get(image[anchor], ())
        used = set(image.values())
        for v in pool:
            if v not in used and ok(u, v):
                image[u] = v
                extend(depth + 1)
                del image[u]

    extend(0)
    return results


def _arcs(g) -> set[tuple[int, int]]:
    if isinstance(g, DirectedGraph):
        return set(g.edges())
    arcs = set()
    for a, b in g.edges():
        arcs.add((a, b))
        arcs.add((b, a))
    return arcs


def brute_force_enumerate(p: PatternGraph, g: UndirectedGraph | DirectedGraph) -> set[Canonical]:
    return brute_force_on_edges(p, g.vertices, _arcs(g))


def brute_force_incremental(p: PatternGraph, prev: DirectedGraph | set, cur: DirectedGraph | set,
                            vertices: Iterable[int] = ()) -> tuple[set[Canonical], set[Canonical]]:
    """Appearing and disappearing subgraphs between two snapshots.

    Snapshots are graphs or plain arc sets (then ``vertices`` may add
    isolated vertices, which never matter for connected patterns).
    """
    prev_arcs = prev if isinstance(prev, set) else _arcs(prev)
    cur_arcs = cur if isinstance(cur, set) else _arcs(cur)
    verts = set(vertices) | {v for e in prev_arcs | cur_arcs for v in e}
    before = brute_force_on_edges(p, verts, prev_arcs)
    after = brute_force_on_edges(p, verts, cur_arcs)
    return after - before, before - after
