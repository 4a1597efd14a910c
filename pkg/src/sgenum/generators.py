"""Seeded test-data generators: random graphs, update streams, pattern catalogs."""

from __future__ import annotations

import random
from itertools import combinations, permutations

from .graph import DirectedGraph, PatternGraph, UndirectedGraph
from .streaming import UpdateBatch

__all__ = [
    "erdos_renyi",
    "random_directed",
    "random_update_batches",
    "hub_graph",
    "connected_patterns",
    "named_pattern",
    "NAMED_DIRECTED",
]


def erdos_renyi(n: int, mean_degree: float, seed: int) -> UndirectedGraph:
    """G(n, p) with p chosen for the requested mean degree; all n vertices kept."""
    rng = random.Random(seed)
    p = min(1.0, mean_degree / (n - 1)) if n > 1 else 0.0
    edges = [(a, b) for a, b in combinations(range(n), 2) if rng.random() < p]
    return UndirectedGraph.from_edges(edges, range(n))


def random_directed(n: int, arcs: int, seed: int) -> DirectedGraph:
    rng = random.Random(seed)
    pool = [(a, b) for a in range(n) for b in range(n) if a != b]
    return DirectedGraph.from_edges(rng.sample(pool, min(arcs, len(pool))), range(n))


def random_update_batches(g: DirectedGraph, steps: int, size: int, seed: int,
                          insert_ratio: float = 0.5) -> list[UpdateBatch]:
    """Valid mixed batches: each deletes existing arcs and inserts absent ones
    relative to the snapshot the previous batches produce."""
    rng = random.Random(seed)
    n_vertices = list(g.vertices)
    arcs = set(g.edges())
    batches = []
    for _ in range(steps):
        ops = []
        touched = set()
        n_ins = sum(1 for _ in range(size) if rng.random() < insert_ratio)
        n_del = min(size - n_ins, len(arcs))
        for a, b in rng.sample(sorted(arcs), n_del):
            ops.append(("-", a, b))
            touched.add((a, b))
        while len(ops) < n_del + n_ins:
            a, b = rng.sample(n_vertices, 2)
            if (a, b) not in arcs and (a, b) not in touched:
                ops.append(("+", a, b))
                touched.add((a, b))
        rng.shuffle(ops)
        batch = UpdateBatch(tuple(ops))
        arcs = batch.apply(arcs)
        batches.append(batch)
    return batches


def hub_graph(n: int, hub_degree: int, mean_degree: float, seed: int) -> UndirectedGraph:
    """Sparse ER background plus vertex 0 joined to ``hub_degree`` others."""
    if hub_degree >= n:
        raise ValueError("hub degree must be below the vertex count")
    base = erdos_renyi(n, mean_degree, seed)
    rng = random.Random(seed + 1)
    spokes = [(0, w) for w in rng.sample(range(1, n), hub_degree)]
    others = [(a, b) for a, b in base.edges() if a != 0 and b != 0]
    return UndirectedGraph.from_edges(others + spokes, range(n))


def _canonical_edges(n: int, edges) -> tuple:
    best = None
    for perm in permutations(range(n)):
        form = tuple(sorted(tuple(sorted((perm[a], perm[b]))) for a, b in edges))
        if best is None or form < best:
            best = form
    return best


def _is_connected(n: int, edges) -> bool:
    adj = {v: set() for v in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, stack = {0}, [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


def connected_patterns(max_n: int = 5, min_n: int = 1) -> list[PatternGraph]:
    """Every connected undirected graph with ``min_n..max_n`` vertices, one per
    isomorphism class, with symmetry-breaking constraints attached.

    Sorted by (n, m, canonical edge list) so indices are stable.
    """
    out = []
    for n in range(min_n, max_n + 1):
        pairs = list(combinations(range(n), 2))
        seen = set()
        forms = []
        for m in range(n - 1, len(pairs) + 1):
            for edges in combinations(pairs, m):
                if not _is_connected(n, edges):
                    continue
                form = _canonical_edges(n, edges)
                if form not in seen:
                    seen.add(form)
                    forms.append(form)
        for form in sorted(forms, key=lambda f: (len(f), f)):
            p = PatternGraph(n, tuple((a + 1, b + 1) for a, b in form))
            out.append(p.with_symmetry_breaking())
    return out


NAMED_DIRECTED = {
    "edge": (2, ((1, 2),)),
    "2-path": (3, ((1, 2), (2, 3))),
    "triangle": (3, ((1, 2), (2, 3), (3, 1))),
    "diamond-chord": (4, ((1, 2), (1, 3), (2, 4), (3, 4), (2, 3))),
    "2-in-star": (3, ((1, 3), (2, 3))),
}


def named_pattern(name: str) -> PatternGraph:
    """Directed test pattern by name, with symmetry breaking."""
    n, edges = NAMED_DIRECTED[name]
    return PatternGraph(n, edges, True).with_symmetry_breaking()
