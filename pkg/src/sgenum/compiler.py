"""Plan generation and the plan-to-plan optimization passes.

Passes are pure functions ``plan -> plan``.  The standard batch pipeline is
``raw -> eliminate_common_subexpressions -> reorder_instructions ->
apply_triangle_cache`` with :func:`apply_vcbc` as an optional last step.
"""

from __future__ import annotations

import heapq
from collections.abc import Sequence
from itertools import combinations

from .graph import PatternGraph
from .plan import (
    DBQ,
    DENU,
    DIR_LETTER,
    ENU,
    INI,
    INS,
    INT,
    KIND_RANK,
    OP_VAR,
    RES,
    TRC,
    TYPE_LETTER,
    UNIVERSE,
    ExecutionPlan,
    Filter,
    Instruction,
    fresh_index,
)

__all__ = [
    "PlanError",
    "generate_raw_plan",
    "eliminate_common_subexpressions",
    "reorder_instructions",
    "apply_triangle_cache",
    "apply_vcbc",
    "cover_prefix_length",
    "generate_incremental_raw_plan",
    "edge_type",
    "optimize_batch_plan",
    "optimize_incremental_plan",
    "uni_operand_elimination",
]


class PlanError(ValueError):
    pass


def _check_order(p: PatternGraph, order: Sequence[int]) -> tuple[int, ...]:
    order = tuple(order)
    if sorted(order) != list(p.vertices):
        raise PlanError(f"matching order {list(order)} is not a permutation of 1..{p.n}")
    return order


def _filters_for(p: PatternGraph, u: int, earlier: Sequence[int], partial) -> list[Filter]:
    filters = []
    for w in earlier:
        if (w, u) in partial:
            filters.append(Filter(">", f"f{w}"))
        elif (u, w) in partial:
            filters.append(Filter("<", f"f{w}"))
        elif not p.adjacent(u, w):
            filters.append(Filter("!=", f"f{w}"))
    return filters


def _substitute(ins: Instruction, old: str, new: str) -> Instruction:
    if old not in ins.operands:
        return ins
    return Instruction(ins.kind, ins.target, tuple(new if o == old else o for o in ins.operands),
                       ins.filters, ins.params)


def uni_operand_elimination(instrs: list[Instruction], pinned=frozenset()) -> list[Instruction]:
    """Drop filter-free single-operand INTs, renaming their uses."""
    instrs = list(instrs)
    changed = True
    while changed:
        changed = False
        for pos, ins in enumerate(instrs):
            if ins.kind == INT and len(ins.operands) == 1 and not ins.filters and ins.target not in pinned:
                old, new = ins.target, ins.operands[0]
                del instrs[pos]
                instrs = [_substitute(i, old, new) for i in instrs]
                changed = True
                break
    return instrs


def generate_raw_plan(p: PatternGraph, order: Sequence[int], partial_order=None,
                      keep_outputs: bool = False) -> ExecutionPlan:
    """Raw batch plan for matching order ``order``.

    With ``keep_outputs`` the candidate sets of vertices outside the vertex
    cover prefix are pinned so that :func:`apply_vcbc` can report them.
    """
    order = _check_order(p, order)
    partial = p.partial_order if partial_order is None else frozenset(partial_order)
    pos = {u: i for i, u in enumerate(order)}

    def has_later_neighbor(u: int) -> bool:
        return any(pos[w] > pos[u] for w in p.neighbors(u))

    k1 = order[0]
    instrs = [Instruction(INI, f"f{k1}", ("start",))]
    if has_later_neighbor(k1):
        instrs.append(Instruction(DBQ, f"A{k1}", (f"f{k1}",)))
    for i in range(1, len(order)):
        u = order[i]
        earlier = order[:i]
        nbrs = [w for w in earlier if p.adjacent(u, w)]
        operands = tuple(f"A{w}" for w in nbrs) or (UNIVERSE,)
        instrs.append(Instruction(INT, f"T{u}", operands))
        instrs.append(Instruction(INT, f"C{u}", (f"T{u}",), tuple(_filters_for(p, u, earlier, partial))))
        instrs.append(Instruction(ENU, f"f{u}", (f"C{u}",)))
        if has_later_neighbor(u):
            instrs.append(Instruction(DBQ, f"A{u}", (f"f{u}",)))
    instrs.append(Instruction(RES, None, tuple(f"f{u}" for u in p.vertices)))
    pinned = frozenset()
    if keep_outputs:
        k = cover_prefix_length(p, order)
        pinned = frozenset(f"C{u}" for u in order[k:])
    instrs = uni_operand_elimination(instrs, pinned)
    return ExecutionPlan(tuple(instrs), order, "batch", pinned=pinned)


def _definition_positions(instrs: Sequence[Instruction]) -> dict[str, int]:
    where = {UNIVERSE: -1}
    for pos, ins in enumerate(instrs):
        for name in ins.defines():
            where.setdefault(name, pos)
    return where


def eliminate_common_subexpressions(plan: ExecutionPlan) -> ExecutionPlan:
    """Hoist operand combinations shared by several INT instructions.

    Picks the largest shared combination, then the most frequent, then the
    earliest appearing, inserts ``T_j := Intersect(combination)`` just before
    its first use and substitutes it everywhere; repeats to a fixpoint.
    """
    instrs = list(plan.instructions)
    n = len(plan.order)
    while True:
        defpos = _definition_positions(instrs)
        support: dict[frozenset[str], list[int]] = {}
        for pos, ins in enumerate(instrs):
            if ins.kind != INT or len(ins.operands) < 2:
                continue
            ops = sorted(set(ins.operands))
            for size in range(2, len(ops) + 1):
                for combo in combinations(ops, size):
                    support.setdefault(frozenset(combo), []).append(pos)
        common = [(c, ps) for c, ps in support.items() if len(ps) >= 2]
        if not common:
            break

        def rank(item):
            combo, ps = item
            tie = sorted(defpos.get(o, 0) for o in combo)
            return (-len(combo), -len(ps), ps[0], tie)

        combo, positions = min(common, key=rank)
        j = fresh_index(instrs, n)
        ordered = tuple(sorted(combo, key=lambda o: defpos.get(o, 0)))
        new_var = f"T{j}"
        hoisted = Instruction(INT, new_var, ordered)
        rewritten = []
        for pos, ins in enumerate(instrs):
            if pos == positions[0]:
                rewritten.append(hoisted)
            if pos in positions:
                rest = tuple(o for o in ins.operands if o not in combo)
                ins = Instruction(INT, ins.target, (new_var,) + rest, ins.filters, ins.params)
            rewritten.append(ins)
        instrs = rewritten
    instrs = uni_operand_elimination(instrs, plan.pinned)
    return plan.with_instructions(instrs)


def _flatten(instrs: list[Instruction], n: int) -> list[Instruction]:
    out: list[Instruction] = []
    defpos = _definition_positions(instrs)
    j = fresh_index(instrs, n)
    for ins in instrs:
        if ins.kind != INT or len(ins.operands) <= 2:
            out.append(ins)
            continue
        ops = sorted(ins.operands, key=lambda o: defpos.get(o, 0))
        acc = ops[0]
        for o in ops[1:-1]:
            var = f"T{j}"
            j += 1
            out.append(Instruction(INT, var, (acc, o)))
            acc = var
        out.append(Instruction(INT, ins.target, (acc, ops[-1]), ins.filters, ins.params))
    return out


def reorder_instructions(plan: ExecutionPlan) -> ExecutionPlan:
    """Flatten INTs to binary form, then topologically sort by cost rank.

    Among ready instructions the lowest kind rank wins (INI < INT < TRC <
    DBQ < ENU < RES), then the earliest original position.  DBQ and ENU
    instructions keep their relative order.
    """
    instrs = _flatten(list(plan.instructions), len(plan.order))
    definer: dict[str, int] = {}
    for pos, ins in enumerate(instrs):
        for name in ins.defines():
            definer[name] = pos
    succ: list[set[int]] = [set() for _ in instrs]
    indeg = [0] * len(instrs)

    def link(a: int, b: int) -> None:
        if b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1

    chain_prev = None
    res_pos = None
    for pos, ins in enumerate(instrs):
        for name in ins.uses():
            if name in definer and definer[name] != pos:
                link(definer[name], pos)
        if ins.kind in (DBQ, ENU, DENU):
            if chain_prev is not None:
                link(chain_prev, pos)
            chain_prev = pos
        if ins.kind == RES:
            res_pos = pos
    if res_pos is not None:
        for pos in range(len(instrs)):
            if pos != res_pos:
                link(pos, res_pos)
    heap = [(KIND_RANK[ins.kind], pos) for pos, ins in enumerate(instrs) if indeg[pos] == 0]
    heapq.heapify(heap)
    result = []
    while heap:
        _, pos = heapq.heappop(heap)
        result.append(instrs[pos])
        for nxt in succ[pos]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(heap, (KIND_RANK[instrs[nxt].kind], nxt))
    assert len(result) == len(instrs), "dependency cycle in execution plan"
    return plan.with_instructions(result)


def apply_triangle_cache(plan: ExecutionPlan, p: PatternGraph) -> ExecutionPlan:
    """Rewrite start-anchored pairwise adjacency intersections into TCache."""
    if plan.variant == "incremental":
        raise PlanError("triangle caching applies to batch plans only")
    start = next(i.target for i in plan.instructions if i.kind == INI)
    owner = {i.target: i.operands[0] for i in plan.instructions if i.kind == DBQ}
    out = []
    for ins in plan.instructions:
        if ins.kind == INT and len(ins.operands) == 2 and not ins.filters and all(o in owner for o in ins.operands):
            fi, fj = owner[ins.operands[0]], owner[ins.operands[1]]
            other = fj if fi == start else fi if fj == start else None
            if other is not None and p.adjacent(int(start[1:]), int(other[1:])):
                ins = Instruction(TRC, ins.target, (fi, fj) + ins.operands)
        out.append(ins)
    return plan.with_instructions(out)


def cover_prefix_length(p: PatternGraph, order: Sequence[int]) -> int:
    """Smallest k such that the first k vertices of ``order`` cover every edge."""
    for k in range(1, len(order) + 1):
        chosen = set(order[:k])
        if all(a in chosen or b in chosen for a, b in p.edges):
            return k
    return len(order)


def apply_vcbc(plan: ExecutionPlan, p: PatternGraph, order: Sequence[int] | None = None) -> ExecutionPlan:
    """Emit vertex-cover compressed codes instead of full matches.

    Vertices after the cover prefix lose their ENU; their candidate sets are
    reported by RES.  Filters between those vertices are removed and recorded
    in ``plan.dropped`` so that expansion can re-apply them.
    """
    order = tuple(order or plan.order)
    k = cover_prefix_length(p, order)
    tail = {f"f{u}" for u in order[k:]}
    out: list[Instruction] = []
    dropped: list[tuple[str, Filter]] = list(plan.dropped)
    replaced: dict[str, str] = {}
    pinned = set(plan.pinned)
    for ins in plan.instructions:
        if ins.kind == ENU and ins.target in tail:
            u = ins.target[1:]
            src = ins.operands[0]
            if src != f"C{u}":
                out.append(Instruction(INT, f"C{u}", (src,)))
            pinned.add(f"C{u}")
            replaced[ins.target] = f"C{u}"
            continue
        if ins.filters and ins.target is not None:
            keep = []
            for flt in ins.filters:
                if flt.subject in tail:
                    dropped.append((f"f{ins.target[1:]}", flt))
                else:
                    keep.append(flt)
            ins = Instruction(ins.kind, ins.target, ins.operands, tuple(keep), ins.params)
        out.append(ins)
    out = [Instruction(RES, None, tuple(replaced.get(o, o) for o in i.operands)) if i.kind == RES else i
           for i in out]
    return plan.with_instructions(out, variant="vcbc", cover_len=k, pinned=frozenset(pinned),
                                  dropped=tuple(dropped))


def edge_type(i: int, k: int) -> str:
    """Type of pattern edge ``e_k`` in the ``i``-th incremental pattern graph."""
    return "either" if k < i else "delta" if k == i else "unaltered"


def _adj_var(ty: str, di: str, u: int) -> str:
    return f"A{TYPE_LETTER[ty]}{DIR_LETTER[di]}{u}"


def generate_incremental_raw_plan(p: PatternGraph, i: int, order: Sequence[int],
                                  partial_order=None) -> ExecutionPlan:
    """Raw plan enumerating incremental matches of the ``i``-th incremental
    pattern graph; ``order`` must start with the endpoints of edge ``e_i``."""
    if not p.directed:
        raise PlanError("incremental plans need a directed pattern")
    if not 1 <= i <= p.m:
        raise PlanError(f"edge index {i} outside 1..{p.m}")
    order = _check_order(p, order)
    s, t = p.edges[i - 1]
    if len(order) < 2 or order[0] != s or order[1] != t:
        raise PlanError(f"order for incremental plan {i} must start with u{s}, u{t}")
    partial = p.partial_order if partial_order is None else frozenset(partial_order)
    ids = p.edge_ids

    def typed_dbqs(u: int) -> list[Instruction]:
        return [Instruction(DBQ, _adj_var(ty, di, u), (f"f{u}",), params=(ty, di, OP_VAR))
                for ty in ("either", "unaltered") for di in ("in", "out")]

    instrs = [
        Instruction(INI, f"f{s}", ("start",)),
        Instruction(DBQ, f"ADO{s}", (f"f{s}",), params=("delta", "out", "*")),
        Instruction(INT, f"C{t}", (f"ADO{s}",), tuple(_filters_for(p, t, [s], partial))),
        Instruction(DENU, f"f{t}", (f"C{t}",)),
    ]
    instrs += typed_dbqs(s) + typed_dbqs(t)
    if (t, s) in ids:
        ty = edge_type(i, ids[(t, s)])
        instrs.append(Instruction(INS, None, (f"f{s}", _adj_var(ty, "out", t))))
    for pos in range(2, len(order)):
        u = order[pos]
        earlier = order[:pos]
        operands = []
        for w in earlier:
            if (w, u) in ids:
                operands.append(_adj_var(edge_type(i, ids[(w, u)]), "out", w))
            if (u, w) in ids:
                operands.append(_adj_var(edge_type(i, ids[(u, w)]), "in", w))
        instrs.append(Instruction(INT, f"T{u}", tuple(operands) or (UNIVERSE,)))
        instrs.append(Instruction(INT, f"C{u}", (f"T{u}",), tuple(_filters_for(p, u, earlier, partial))))
        instrs.append(Instruction(ENU, f"f{u}", (f"C{u}",)))
        instrs += typed_dbqs(u)
    instrs.append(Instruction(RES, None, tuple(f"f{u}" for u in p.vertices)))
    used = {name for ins in instrs for name in ins.uses()}
    instrs = [ins for ins in instrs if ins.kind != DBQ or ins.target in used]
    instrs = uni_operand_elimination(instrs)
    return ExecutionPlan(tuple(instrs), order, "incremental", delta_edge=i)


def optimize_batch_plan(p: PatternGraph, order: Sequence[int], *, cse: bool = True, reorder: bool = True,
                        triangle_cache: bool = True, vcbc: bool = False) -> ExecutionPlan:
    plan = generate_raw_plan(p, order, keep_outputs=vcbc)
    if cse:
        plan = eliminate_common_subexpressions(plan)
    if reorder:
        plan = reorder_instructions(plan)
    if triangle_cache:
        plan = apply_triangle_cache(plan, p)
    if vcbc:
        plan = apply_vcbc(plan, p, order)
    return plan


def optimize_incremental_plan(p: PatternGraph, i: int, order: Sequence[int], *, cse: bool = True,
                              reorder: bool = True) -> ExecutionPlan:
    plan = generate_incremental_raw_plan(p, i, order)
    if cse:
        plan = eliminate_common_subexpressions(plan)
    if reorder:
        plan = reorder_instructions(plan)
    return plan
