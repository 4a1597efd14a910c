"""Continuous enumeration over a stream of edge-update batches.

Each time step runs three phases separated by barriers: write the step's
delta adjacency sets, enumerate incremental matches of every incremental
pattern graph from the vertices with outgoing deltas, then fold the deltas
back so the store holds the new snapshot.
"""

from __future__ import annotations

import io
import threading
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import TextIO

from .compiler import edge_type, optimize_incremental_plan
from .executor import ExecCounters, SearchTask, TaskContext, _Program, _slices, run_worker_pool
from .graph import DirectedGraph, GraphFormatError, PatternGraph, TotalOrder
from .optimizer import CostReport, GraphStats, best_incremental_plans
from .plan import ExecutionPlan
from .storage import (
    AdjacencyCache,
    CommMetrics,
    ConsistencyError,
    DeltaSets,
    GraphStore,
    InMemoryStore,
    apply_delta_sets,
    merge_post_step,
    store_snapshot_graph,
)

__all__ = [
    "IncrementalPatternGraph",
    "incremental_pattern_graphs",
    "UpdateBatch",
    "delta_adjacency_sets",
    "StepResult",
    "StreamConfig",
    "StreamingEngine",
    "process_time_step",
    "parse_update_stream",
    "TheoremViolation",
]


class TheoremViolation(AssertionError):
    """A runtime correctness check on incremental results failed."""


@dataclass(frozen=True)
class IncrementalPatternGraph:
    base: PatternGraph
    i: int
    tau: dict[int, str]

    @property
    def delta_edge(self) -> tuple[int, int]:
        return self.base.edges[self.i - 1]


def incremental_pattern_graphs(p: PatternGraph) -> list[IncrementalPatternGraph]:
    if not p.directed:
        raise ValueError("incremental pattern graphs need a directed pattern")
    return [IncrementalPatternGraph(p, i, {k: edge_type(i, k) for k in range(1, p.m + 1)})
            for i in range(1, p.m + 1)]


@dataclass(frozen=True)
class UpdateBatch:
    ops: tuple[tuple[str, int, int], ...]

    def __post_init__(self):
        seen = set()
        for op, a, b in self.ops:
            if op not in ("+", "-"):
                raise ValueError(f"unknown update op {op!r}")
            if a == b:
                raise ValueError(f"self-loop update ({a}, {b})")
            if (a, b) in seen:
                raise ValueError(f"edge ({a}, {b}) appears twice in one batch")
            seen.add((a, b))

    def __len__(self) -> int:
        return len(self.ops)

    def validate(self, arcs: set[tuple[int, int]]) -> None:
        for op, a, b in self.ops:
            if op == "+" and (a, b) in arcs:
                raise ConsistencyError(f"cannot insert existing edge ({a}, {b})")
            if op == "-" and (a, b) not in arcs:
                raise ConsistencyError(f"cannot delete absent edge ({a}, {b})")

    def apply(self, arcs: set[tuple[int, int]]) -> set[tuple[int, int]]:
        self.validate(arcs)
        out = set(arcs)
        for op, a, b in self.ops:
            if op == "+":
                out.add((a, b))
            else:
                out.discard((a, b))
        return out


def delta_adjacency_sets(batch: UpdateBatch) -> DeltaSets:
    """Per-vertex flagged in/out changes, sorted by neighbor id."""
    d_in: dict[int, list[tuple[str, int]]] = {}
    d_out: dict[int, list[tuple[str, int]]] = {}
    for op, a, b in batch.ops:
        d_out.setdefault(a, []).append((op, b))
        d_in.setdefault(b, []).append((op, a))
    keys = sorted(set(d_in) | set(d_out))
    return {v: (tuple(sorted(d_in.get(v, ()), key=lambda x: x[1])),
                tuple(sorted(d_out.get(v, ()), key=lambda x: x[1]))) for v in keys}


@dataclass
class StepResult:
    t: int
    appearing: set[tuple[int, ...]] = field(default_factory=set)
    disappearing: set[tuple[int, ...]] = field(default_factory=set)
    per_plan: dict[int, tuple[set, set]] = field(default_factory=dict)
    metrics: dict[str, float] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)
    tasks: int = 0
    worker_times: list[float] = field(default_factory=list)


@dataclass
class StreamConfig:
    workers: int = 1
    theta: int | None = 500
    cache_bytes: int = 1 << 26
    check_theorems: bool = True
    strict: bool = False  # raise on the first violated check
    orders: Sequence[Sequence[int]] | None = None  # per delta edge; None: optimizer


def _image_edge(p: PatternGraph, f: tuple[int, ...], i: int) -> tuple[int, int]:
    a, b = p.edges[i - 1]
    return f[a - 1], f[b - 1]


def _subgraph(p: PatternGraph, f: tuple[int, ...]):
    return tuple(sorted(f)), tuple(sorted((f[a - 1], f[b - 1]) for a, b in p.edges))


def process_time_step(t: int, batch: UpdateBatch, p: PatternGraph, plans: Sequence[ExecutionPlan],
                      store: GraphStore, cache: AdjacencyCache | None, config: StreamConfig,
                      metrics: CommMetrics | None = None) -> StepResult:
    """Run one step; on a batch inconsistent with the store nothing is written."""
    metrics = metrics if metrics is not None else CommMetrics()
    delta = delta_adjacency_sets(batch)
    apply_delta_sets(store, delta)
    programs = [_Program(plan) for plan in plans]
    order = TotalOrder.id_based()
    universe = tuple(store.keys())
    tasks: list[SearchTask] = []
    for v, (_, d_out) in delta.items():
        if not d_out:
            continue
        ids = [w for _, w in d_out]
        if config.theta is not None and len(ids) >= config.theta:
            tasks += [SearchTask(v, lo, hi) for lo, hi in _slices(ids, config.theta)]
        else:
            tasks.append(SearchTask(v))
    workers = max(1, config.workers)
    counters = [ExecCounters() for _ in range(workers)]
    found: list[tuple[int, str, tuple[int, ...]]] = []
    lock = threading.Lock()

    def work(task: SearchTask, idx: int) -> None:
        local = []
        for i, program in enumerate(programs, start=1):
            ctx = TaskContext(program, task, store, cache, metrics, order.key, universe, None, counters[idx],
                              snapshot=t)
            ctx.run()
            local += [(i, op, f) for op, f in ctx.emitted]
        with lock:
            found.extend(local)

    t0 = time.perf_counter()
    times = run_worker_pool(tasks, work, workers)
    elapsed = time.perf_counter() - t0
    merge_post_step(store, delta)

    result = StepResult(t, tasks=len(tasks), worker_times=times)
    for i in range(1, len(plans) + 1):
        result.per_plan[i] = (set(), set())
    inserted = {(a, b) for op, a, b in batch.ops if op == "+"}
    deleted = {(a, b) for op, a, b in batch.ops if op == "-"}
    seen_plus: dict = {}
    seen_minus: dict = {}
    for i, op, f in found:
        plus, minus = result.per_plan[i]
        target, seen, changed = (plus, seen_plus, inserted) if op == "+" else (minus, seen_minus, deleted)
        if config.check_theorems:
            edge = _image_edge(p, f, plans[i - 1].delta_edge)
            if edge not in changed:
                result.violations.append(f"step {t}: match {f} of plan {i} maps its delta edge to {edge}, "
                                         f"which was not {'inserted' if op == '+' else 'deleted'}")
            sub = _subgraph(p, f)
            if sub in seen:
                result.violations.append(f"step {t}: subgraph {sub} reported twice (plans {seen[sub]} and {i})")
            seen[sub] = i
        target.add(f)
    for plus, minus in result.per_plan.values():
        result.appearing |= plus
        result.disappearing |= minus
    total = ExecCounters()
    for c in counters:
        total.add(c)
    result.metrics = {"appearing": len(result.appearing), "disappearing": len(result.disappearing),
                      "tasks": len(tasks), "enumerate_s": round(elapsed, 6),
                      "intersections": total.intersections, "dbq_execs": total.dbq_execs}
    if result.violations and config.strict:
        raise TheoremViolation(result.violations[0])
    return result


class StreamingEngine:
    """Holds the store, cache and compiled plans across time steps."""

    def __init__(self, p: PatternGraph, initial: DirectedGraph, config: StreamConfig | None = None,
                 store: GraphStore | None = None):
        if not p.directed:
            raise ValueError("streaming needs a directed pattern")
        self.p = p
        self.config = config or StreamConfig()
        self.store = store if store is not None else InMemoryStore()
        store_snapshot_graph(initial, self.store)
        self.cache = AdjacencyCache(self.config.cache_bytes) if self.config.cache_bytes > 0 else None
        self.metrics = CommMetrics()
        self.t = 0
        if self.config.orders is not None:
            self.plans = [optimize_incremental_plan(p, i, o) for i, o in enumerate(self.config.orders, start=1)]
            self.costs: list[CostReport | None] = [None] * len(self.plans)
        else:
            stats = GraphStats.of(initial) if initial.num_vertices else GraphStats(1, 0)
            chosen = best_incremental_plans(p, stats)
            self.plans = [plan for plan, _ in chosen]
            self.costs = [cost for _, cost in chosen]

    def step(self, batch: UpdateBatch) -> StepResult:
        self.t += 1
        try:
            return process_time_step(self.t, batch, self.p, self.plans, self.store, self.cache, self.config,
                                     self.metrics)
        except ConsistencyError:
            self.t -= 1
            raise

    def run(self, batches: Iterable[UpdateBatch]) -> list[StepResult]:
        return [self.step(b) for b in batches]


def parse_update_stream(source: TextIO | str) -> tuple[DirectedGraph, list[UpdateBatch]]:
    """Initial ``src dst`` arcs, then ``## step <t>`` sections of ``+ a b`` /
    ``- a b`` lines.  Steps must be numbered 1, 2, ... in order."""
    if isinstance(source, str):
        source = io.StringIO(source)
    initial: list[tuple[int, int]] = []
    steps: list[list[tuple[str, int, int]]] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("##"):
            parts = line[2:].split()
            if len(parts) != 2 or parts[0] != "step" or not parts[1].isdigit():
                raise GraphFormatError(f"bad step header {line!r}", lineno)
            if int(parts[1]) != len(steps) + 1:
                raise GraphFormatError(f"expected step {len(steps) + 1}, got {parts[1]}", lineno)
            steps.append([])
            continue
        if line.startswith("#"):
            continue
        parts = line.split()
        try:
            if steps:
                if len(parts) != 3 or parts[0] not in ("+", "-"):
                    raise ValueError
                steps[-1].append((parts[0], int(parts[1]), int(parts[2])))
            else:
                if len(parts) != 2:
                    raise ValueError
                initial.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise GraphFormatError(f"bad line {line!r}", lineno) from None
    vertices = {v for e in initial for v in e} | {v for s in steps for _, a, b in s for v in (a, b)}
    try:
        batches = [UpdateBatch(tuple(s)) for s in steps]
    except ValueError as exc:
        raise GraphFormatError(str(exc)) from None
    return DirectedGraph.from_edges(initial, vertices), batches


def dump_update_stream(initial: Iterable[tuple[int, int]], batches: Sequence[UpdateBatch]) -> str:
    lines = [f"{a} {b}" for a, b in sorted(initial)]
    for t, batch in enumerate(batches, start=1):
        lines.append(f"## step {t}")
        lines += [f"{op} {a} {b}" for op, a, b in batch.ops]
    return "\n".join(lines) + "\n"
