"""Batch enumeration: task generation, the plan interpreter and the worker pool."""

from __future__ import annotations

import queue
import threading
import time
from bisect import bisect_left
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from itertools import product

from .compiler import optimize_batch_plan
from .graph import PatternGraph, TotalOrder, UndirectedGraph
from .optimizer import CostReport, GraphStats, best_execution_plan
from .plan import DBQ, DENU, ENU, INI, INS, INT, OP_VAR, RES, TRC, UNIVERSE, ExecutionPlan, Filter, validate_plan
from .storage import AdjacencyCache, CommMetrics, GraphStore, InMemoryStore, cached_get, graph_bytes, store_batch_graph

__all__ = [
    "PlanExecutionError",
    "intersect_sorted",
    "SearchTask",
    "generate_tasks",
    "MatchSink",
    "ExecCounters",
    "TaskContext",
    "execute_task",
    "expand_compressed",
    "EngineConfig",
    "RunResult",
    "enumerate_matches",
    "GALLOP_RATIO",
]

GALLOP_RATIO = 32
TRIANGLE_CACHE_CAP_BYTES = 64 * 1024 * 1024


class PlanExecutionError(RuntimeError):
    pass


def intersect_sorted(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    """Intersection of two ascending sequences, ascending.

    Binary-search probing when one side is at least ``GALLOP_RATIO`` times
    smaller; otherwise a hash probe of the shorter side into the longer,
    which is the fastest linear-time merge available in CPython.
    """
    if len(a) > len(b):
        a, b = b, a
    if not a:
        return ()
    if len(a) * GALLOP_RATIO <= len(b):
        out = []
        lo = 0
        nb = len(b)
        for x in a:
            lo = bisect_left(b, x, lo)
            if lo == nb:
                break
            if b[lo] == x:
                out.append(x)
        return tuple(out)
    bs = set(b)
    return tuple(x for x in a if x in bs)


@dataclass(frozen=True)
class SearchTask:
    """A starting vertex, optionally restricted to a slice ``[lo, hi]`` (by
    vertex id, inclusive) of the second vertex's candidates."""

    start: int
    lo: int | None = None
    hi: int | None = None

    @property
    def is_split(self) -> bool:
        return self.lo is not None

    def admits(self, v: int) -> bool:
        return self.lo is None or self.lo <= v <= self.hi


def _slices(base: Sequence[int], theta: int) -> list[tuple[int, int]]:
    return [(base[i], base[min(i + theta, len(base)) - 1]) for i in range(0, len(base), theta)]


def generate_tasks(g, plan: ExecutionPlan, p: PatternGraph, theta: int | None = None) -> Iterator[SearchTask]:
    """One task per vertex, split by ``theta`` as described in the module docs.

    When the first two vertices of the order are adjacent in ``p`` a start
    ``v`` with ``d(v) >= theta`` is cut into ``ceil(d(v)/theta)`` slices of
    its adjacency; otherwise the vertex universe is sliced.
    """
    if theta is not None and theta < 1:
        raise ValueError("split threshold must be >= 1")
    verts = g.vertices
    adjacent = len(plan.order) > 1 and p.adjacent(plan.order[0], plan.order[1])
    for v in verts:
        if theta is None or len(plan.order) < 2:
            yield SearchTask(v)
            continue
        base = g.neighbors(v) if adjacent else verts
        if len(base) >= theta:
            for lo, hi in _slices(base, theta):
                yield SearchTask(v, lo, hi)
        else:
            yield SearchTask(v)


class MatchSink:
    """Thread-safe result collector.

    ``count`` keeps only totals, ``emit`` keeps each match, ``emit-compressed``
    keeps compressed codes; with ``expand`` the counted total is the number
    of matches the codes expand to.
    """

    MODES = ("count", "emit", "emit-compressed")

    def __init__(self, mode: str = "count", expand=None):
        if mode not in self.MODES:
            raise ValueError(f"unknown sink mode {mode!r}")
        self.mode = mode
        self._expand = expand
        self._lock = threading.Lock()
        self.total = 0
        self.codes = 0
        self.items: list[tuple] = []

    def report(self, item: tuple) -> None:
        n = 1
        if self._expand is not None:
            n = sum(1 for _ in self._expand(item))
        with self._lock:
            self.codes += 1
            self.total += n
            if self.mode != "count":
                self.items.append(item)

    def format_item(self, item: tuple) -> str:
        parts = []
        for x in item:
            parts.append("[" + " ".join(map(str, x)) + "]" if isinstance(x, tuple) else str(x))
        return " ".join(parts)


@dataclass
class ExecCounters:
    int_execs: int = 0
    trc_execs: int = 0
    trc_hits: int = 0
    intersections: int = 0
    dbq_execs: int = 0
    res: int = 0

    def add(self, other: ExecCounters) -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))


class _Program:
    """Plan lowered for interpretation: per-instruction tuples and bookkeeping."""

    def __init__(self, plan: ExecutionPlan):
        diags = validate_plan(plan)
        if diags:
            raise PlanExecutionError("invalid plan: " + "; ".join(diags))
        self.plan = plan
        self.instrs = plan.instructions
        self.second = f"f{plan.order[1]}" if len(plan.order) > 1 else None
        self.res_operands = next(i.operands for i in plan.instructions if i.kind == RES)
        # pinned output set of the second vertex in compressed plans
        self.second_set = None
        if self.second is not None and f"C{plan.order[1]}" in self.res_operands:
            self.second_set = f"C{plan.order[1]}"


class TaskContext:
    """Interpreter state of one task: variable bindings and the triangle cache."""

    def __init__(self, program: _Program, task: SearchTask, store: GraphStore, cache: AdjacencyCache | None,
                 metrics: CommMetrics, order_key, universe: Sequence[int], sink: MatchSink,
                 counters: ExecCounters, shadow_trc: bool = False, snapshot=None):
        self.program = program
        self.task = task
        self.store, self.cache, self.metrics = store, cache, metrics
        self.key = order_key
        self.universe = universe
        self.sink = sink
        self.counters = counters
        self.env: dict[str, object] = {}
        self.tcache: dict[tuple[int, int], tuple[int, ...]] = {}
        self.tcache_bytes = 0
        self.shadow_trc = shadow_trc
        self.snapshot = snapshot  # streaming: step t, else None
        self.emitted: list[tuple] = []

    def _filter(self, values: Sequence, filters: Sequence[Filter]) -> tuple:
        env, key = self.env, self.key
        checks = []
        for flt in filters:
            ref = env[flt.subject]
            if flt.kind == "!=":
                checks.append((0, ref))
            else:
                checks.append((1 if flt.kind == ">" else -1, key(ref)))
        flagged = bool(values) and isinstance(values[0], tuple)  # raw delta set of (op, vertex)
        out = []
        for item in values:
            x = item[1] if flagged else item
            kx = None
            for sign, ref in checks:
                if sign == 0:
                    if x == ref:
                        break
                else:
                    if kx is None:
                        kx = key(x)
                    if (kx <= ref) if sign > 0 else (kx >= ref):
                        break
            else:
                out.append(item)
        return tuple(out)

    def _operand(self, name: str):
        if name == UNIVERSE:
            return self.universe
        try:
            return self.env[name]
        except KeyError:
            raise PlanExecutionError(f"variable {name} read before definition") from None

    def _intersect(self, operands: Sequence[str]) -> tuple[int, ...]:
        sets = sorted((self._operand(o) for o in operands), key=len)
        acc = sets[0]
        for s in sets[1:]:
            if not acc:
                break
            acc = intersect_sorted(acc, s)
        return tuple(acc)

    def run(self, pc: int = 0) -> None:
        instrs = self.program.instrs
        env = self.env
        c = self.counters
        while pc < len(instrs):
            ins = instrs[pc]
            kind = ins.kind
            if kind == INI:
                env[ins.target] = self.task.start
            elif kind == DBQ:
                c.dbq_execs += 1
                v = env[ins.operands[0]]
                if ins.params is None:
                    env[ins.target] = cached_get(v, self.store, self.cache, self.metrics)
                else:
                    ty, di, op = ins.params
                    if op == OP_VAR:
                        op = env[OP_VAR]
                    env[ins.target] = cached_get(v, self.store, self.cache, self.metrics, ty, di, op, self.snapshot)
            elif kind == INT:
                c.int_execs += 1
                c.intersections += len(ins.operands) - 1
                value = self._intersect(ins.operands)
                if ins.filters:
                    value = self._filter(value, ins.filters)
                env[ins.target] = value
            elif kind == TRC:
                c.trc_execs += 1
                fi, fj, ai, aj = ins.operands
                a, b = env[fi], env[fj]
                k = (a, b) if a <= b else (b, a)
                hit = self.tcache.get(k)
                if hit is None:
                    c.intersections += 1
                    hit = intersect_sorted(env[ai], env[aj])
                    if self.tcache_bytes < TRIANGLE_CACHE_CAP_BYTES:
                        self.tcache[k] = hit
                        self.tcache_bytes += 64 + 8 * len(hit)
                else:
                    c.trc_hits += 1
                    if self.shadow_trc and hit != intersect_sorted(env[ai], env[aj]):
                        raise PlanExecutionError(f"triangle cache returned a stale set for {k}")
                env[ins.target] = hit
            elif kind == ENU:
                values = env[ins.operands[0]] if ins.operands[0] != UNIVERSE else self.universe
                sliced = ins.target == self.program.second and self.task.is_split
                for v in values:
                    if sliced and not self.task.admits(v):
                        continue
                    env[ins.target] = v
                    self.run(pc + 1)
                env.pop(ins.target, None)
                return
            elif kind == DENU:
                sliced = ins.target == self.program.second and self.task.is_split
                for op, v in env[ins.operands[0]]:
                    if sliced and not self.task.admits(v):
                        continue
                    env[OP_VAR] = op
                    env[ins.target] = v
                    self.run(pc + 1)
                env.pop(ins.target, None)
                return
            elif kind == INS:
                x, s = ins.operands
                values = env[s]
                i = bisect_left(values, env[x])
                if not (i < len(values) and values[i] == env[x]):
                    return
            elif kind == RES:
                c.res += 1
                self._emit(ins.operands)
                return
            pc += 1

    def _emit(self, operands: Sequence[str]) -> None:
        item = []
        second_set = self.program.second_set
        for name in operands:
            value = self.env[name]
            if isinstance(value, tuple):
                if name == second_set and self.task.is_split:
                    value = tuple(v for v in value if self.task.admits(v))
                    if not value:
                        return
            item.append(value)
        item = tuple(item)
        if self.snapshot is not None:
            self.emitted.append((self.env.get(OP_VAR), item))
        else:
            self.sink.report(item)


def execute_task(task: SearchTask, plan: ExecutionPlan | _Program, store: GraphStore, cache: AdjacencyCache | None,
                 order: TotalOrder, sink: MatchSink, metrics: CommMetrics | None = None,
                 universe: Sequence[int] = (), counters: ExecCounters | None = None,
                 shadow_trc: bool = False) -> ExecCounters:
    program = plan if isinstance(plan, _Program) else _Program(plan)
    counters = counters if counters is not None else ExecCounters()
    ctx = TaskContext(program, task, store, cache, metrics if metrics is not None else CommMetrics(),
                      order.key, universe, sink, counters, shadow_trc)
    ctx.run()
    return counters


def expand_compressed(code: tuple, plan: ExecutionPlan, order: TotalOrder) -> Iterator[tuple[int, ...]]:
    """Matches encoded by one compressed code.

    Picks one vertex from every reported set, enforcing injectivity across
    all positions and the filters compression removed.
    """
    positions = [i for i, x in enumerate(code) if isinstance(x, tuple)]
    checks = [(int(var[1:]) - 1, flt.kind, int(flt.subject[1:]) - 1) for var, flt in plan.dropped]
    fixed = [x for x in code if not isinstance(x, tuple)]
    for picks in product(*(code[i] for i in positions)):
        if len(set(picks)) != len(picks) or set(picks) & set(fixed):
            continue
        full = list(code)
        for i, v in zip(positions, picks):
            full[i] = v
        ok = True
        for a, kind, b in checks:
            x, y = full[a], full[b]
            if (kind == "!=" and x == y) or (kind == ">" and order.key(x) <= order.key(y)) or \
                    (kind == "<" and order.key(x) >= order.key(y)):
                ok = False
                break
        if ok:
            yield tuple(full)


@dataclass
class EngineConfig:
    workers: int = 1
    theta: int | None = 500
    cache_bytes: int | None = None  # None: large enough for the whole graph
    sink: str = "count"
    order: Sequence[int] | None = None
    cse: bool = True
    reorder: bool = True
    triangle_cache: bool = True
    vcbc: bool = False
    expand: bool = True
    latency_us: float = 0.0
    shadow_trc: bool = False


@dataclass
class RunResult:
    count: int
    items: list[tuple]
    metrics: CommMetrics
    counters: ExecCounters
    worker_times: list[float]
    tasks: int
    wall_time: float
    plan: ExecutionPlan
    cost: CostReport | None = None
    sink: MatchSink | None = field(default=None, repr=False)

    def summary(self) -> dict[str, float]:
        out = {"matches": self.count, "tasks": self.tasks, "wall_time_s": round(self.wall_time, 6)}
        out.update(self.metrics.as_dict())
        out.update({"int_execs": self.counters.int_execs, "trc_execs": self.counters.trc_execs,
                    "trc_hits": self.counters.trc_hits, "intersections": self.counters.intersections})
        if self.worker_times:
            mean = sum(self.worker_times) / len(self.worker_times)
            out["worker_time_max_over_mean"] = round(max(self.worker_times) / mean, 6) if mean else 1.0
        return out


def run_worker_pool(tasks: Sequence, work, workers: int) -> list[float]:
    """Run ``work(task, counters)`` over ``tasks`` on ``workers`` threads.

    Returns per-worker thread CPU time.  Exceptions in any worker propagate.
    """
    workers = max(1, workers)
    q: queue.SimpleQueue = queue.SimpleQueue()
    for t in tasks:
        q.put(t)
    times = [0.0] * workers
    errors: list[BaseException] = []

    def loop(idx: int) -> None:
        t0 = time.thread_time()
        try:
            while not errors:
                try:
                    task = q.get_nowait()
                except queue.Empty:
                    break
                work(task, idx)
        except BaseException as exc:  # surfaced to the caller below
            errors.append(exc)
        finally:
            times[idx] = time.thread_time() - t0

    if workers == 1:
        loop(0)
    else:
        threads = [threading.Thread(target=loop, args=(i,), daemon=True) for i in range(workers)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
    if errors:
        raise errors[0]
    return times


def enumerate_matches(p: PatternGraph, g: UndirectedGraph, config: EngineConfig | None = None,
                      plan: ExecutionPlan | None = None, store: GraphStore | None = None) -> RunResult:
    """Store ``g``, compile a plan, run every task and collect the results."""
    config = config or EngineConfig()
    if p.directed:
        raise ValueError("batch enumeration needs an undirected pattern")
    t0 = time.perf_counter()
    store = store if store is not None else InMemoryStore(config.latency_us)
    store_batch_graph(g, store)
    cost = None
    if plan is None:
        opts = dict(cse=config.cse, reorder=config.reorder, triangle_cache=config.triangle_cache, vcbc=config.vcbc)
        if config.order is not None:
            plan = optimize_batch_plan(p, config.order, **opts)
        elif g.num_vertices == 0:
            plan = optimize_batch_plan(p, list(p.vertices), **opts)
        else:
            plan, cost = best_execution_plan(p, GraphStats.of(g), **opts)
    program = _Program(plan)
    order = TotalOrder.degree_based(g)
    capacity = config.cache_bytes if config.cache_bytes is not None else graph_bytes(g)
    cache = AdjacencyCache(capacity) if capacity > 0 else None
    metrics = CommMetrics()
    expand = None
    if plan.variant == "vcbc" and config.expand:
        def expand(code):
            return expand_compressed(code, plan, order)
    sink = MatchSink(config.sink if plan.variant != "vcbc" or config.sink == "count" else "emit-compressed", expand)
    universe = g.vertices
    tasks = list(generate_tasks(g, plan, p, config.theta))
    per_worker = [ExecCounters() for _ in range(max(1, config.workers))]

    def work(task, idx):
        ctx = TaskContext(program, task, store, cache, metrics, order.key, universe, sink, per_worker[idx],
                          config.shadow_trc)
        ctx.run()

    times = run_worker_pool(tasks, work, config.workers)
    counters = ExecCounters()
    for c in per_worker:
        counters.add(c)
    return RunResult(sink.total, sink.items, metrics, counters, times, len(tasks),
                     time.perf_counter() - t0, plan, cost, sink)
