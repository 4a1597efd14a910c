from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgenum.compiler import (
    PlanError,
    apply_triangle_cache,
    apply_vcbc,
    cover_prefix_length,
    edge_type,
    eliminate_common_subexpressions,
    generate_incremental_raw_plan,
    generate_raw_plan,
    optimize_batch_plan,
    optimize_incremental_plan,
    reorder_instructions,
    uni_operand_elimination,
)
from sgenum.generators import connected_patterns, named_pattern
from sgenum.graph import PatternGraph
from sgenum.plan import DBQ, ENU, INT, RES, TRC, Instruction, parse_plan, validate_plan

PATTERNS = connected_patterns(5, min_n=2)

RAW_SIX = """\
f1:=Init(start)
A1:=GetAdj(f1)
f3:=Foreach(A1)
A3:=GetAdj(f3)
C5:=Intersect(A1)|{>f3}
f5:=Foreach(C5)
A5:=GetAdj(f5)
T2:=Intersect(A1,A3)
C2:=Intersect(T2)|{≠f5}
f2:=Foreach(C2)
T6:=Intersect(A1,A5)
C6:=Intersect(T6)|{≠f3,≠f2}
f6:=Foreach(C6)
T4:=Intersect(A1,A3,A5)
C4:=Intersect(T4)|{≠f2,≠f6}
f4:=Foreach(C4)
f:=ReportMatch(f1,f2,f3,f4,f5,f6)
"""

OPTIMIZED_SIX = """\
f1:=Init(start)
A1:=GetAdj(f1)
f3:=Foreach(A1)
C5:=Intersect(A1)|{>f3}
A3:=GetAdj(f3)
T7:=TCache(f1,f3,A1,A3)
f5:=Foreach(C5)
C2:=Intersect(T7)|{≠f5}
A5:=GetAdj(f5)
T6:=TCache(f1,f5,A1,A5)
T4:=Intersect(T7,A5)
f2:=Foreach(C2)
C6:=Intersect(T6)|{≠f3,≠f2}
f6:=Foreach(C6)
C4:=Intersect(T4)|{≠f2,≠f6}
f4:=Foreach(C4)
f:=ReportMatch(f1,f2,f3,f4,f5,f6)
"""


def _body(plan) -> str:
    return "".join(str(i) + "\n" for i in plan.instructions)


def _stages(p, order):
    raw = generate_raw_plan(p, order)
    cse = eliminate_common_subexpressions(raw)
    ro = reorder_instructions(cse)
    return raw, cse, ro, apply_triangle_cache(ro, p)


def test_six_vertex_raw_plan(six_vertex):
    p, order = six_vertex
    assert _body(generate_raw_plan(p, order)) == RAW_SIX


def test_six_vertex_optimized_plan(six_vertex):
    p, order = six_vertex
    plan = optimize_batch_plan(p, order)
    assert _body(plan) == OPTIMIZED_SIX
    assert validate_plan(plan) == []


def test_cse_hoists_shared_pair(six_vertex):
    p, order = six_vertex
    cse = eliminate_common_subexpressions(generate_raw_plan(p, order))
    body = _body(cse)
    # A1∩A3 is shared by C2 and C4; A1∩A5 by C6 and C4
    assert "T7:=Intersect(A1,A3)" in body
    assert "T4:=Intersect(T7,A5)" in body
    assert sum(len(i.operands) - 1 for i in generate_raw_plan(p, order).instructions if i.kind == INT) == 4
    assert sum(len(i.operands) - 1 for i in cse.instructions if i.kind == INT) == 3


def test_uni_operand_elimination_keeps_filters_and_pins():
    instrs = [Instruction(INT, "T2", ("A1",)), Instruction(ENU, "f2", ("T2",)),
              Instruction(INT, "C3", ("A1",), ()), Instruction(RES, None, ("f2", "C3"))]
    out = uni_operand_elimination(instrs, pinned={"C3"})
    assert [str(i) for i in out] == ["f2:=Foreach(A1)", "C3:=Intersect(A1)", "f:=ReportMatch(f2,C3)"]


def test_edge_pattern_plan_is_five_lines():
    p = PatternGraph(2, ((1, 2),)).with_symmetry_breaking()
    assert _body(optimize_batch_plan(p, [1, 2])) == (
        "f1:=Init(start)\nA1:=GetAdj(f1)\nC2:=Intersect(A1)|{>f1}\nf2:=Foreach(C2)\nf:=ReportMatch(f1,f2)\n")


def test_disconnected_prefix_uses_universe():
    p = PatternGraph(3, ((1, 2), (2, 3))).with_symmetry_breaking()
    body = _body(generate_raw_plan(p, [1, 3, 2]))
    assert "Foreach(V(G))" in body or "Intersect(V(G))" in body


def test_bad_order_rejected():
    with pytest.raises(PlanError):
        generate_raw_plan(PatternGraph(3, ((1, 2), (2, 3))), [1, 2, 2])


@settings(max_examples=60, deadline=None)
@given(idx=st.integers(0, len(PATTERNS) - 1), data=st.data())
def test_pipeline_is_valid_and_idempotent(idx, data):
    p = PATTERNS[idx]
    order = data.draw(st.permutations(list(p.vertices)))
    raw, cse, ro, trc = _stages(p, order)
    for plan in (raw, cse, ro, trc):
        assert validate_plan(plan) == []
        assert plan.kinds()[-1] == RES
    assert eliminate_common_subexpressions(cse).instructions == cse.instructions
    assert reorder_instructions(ro).instructions == ro.instructions
    assert apply_triangle_cache(trc, p).instructions == trc.instructions
    # no single-operand unfiltered intersections survive
    assert not any(i.kind == INT and len(i.operands) == 1 and not i.filters for i in trc.instructions)
    # DBQs and ENUs keep their relative sequence
    chain = [(i.kind, i.target) for i in raw.instructions if i.kind in (DBQ, ENU)]
    assert [(i.kind, i.target) for i in ro.instructions if i.kind in (DBQ, ENU)] == chain


@settings(max_examples=60, deadline=None)
@given(idx=st.integers(0, len(PATTERNS) - 1), data=st.data())
def test_cse_never_adds_pairwise_intersections(idx, data):
    p = PATTERNS[idx]
    order = data.draw(st.permutations(list(p.vertices)))
    raw, cse, _, trc = _stages(p, order)

    def pairs(plan):
        return sum(len(i.operands) - 1 for i in plan.instructions if i.kind == INT) + \
            sum(1 for i in plan.instructions if i.kind == TRC)
    assert pairs(cse) <= pairs(raw)
    assert pairs(trc) == pairs(cse)


def test_triangle_cache_only_for_start_vertex_pairs():
    p = PatternGraph(4, ((1, 2), (2, 3), (3, 4), (2, 4))).with_symmetry_breaking()
    trc = optimize_batch_plan(p, [1, 2, 3, 4])
    assert not any(i.kind == TRC for i in trc.instructions)
    trc = optimize_batch_plan(p, [2, 3, 4, 1])
    assert [i.operands[:2] for i in trc.instructions if i.kind == TRC] == [("f2", "f3")]


@pytest.mark.parametrize("n, edges, order, k", [
    (6, ((1, 2), (1, 3), (1, 5), (1, 6), (2, 3), (5, 6), (1, 4), (3, 4), (4, 5)), [1, 3, 5, 2, 6, 4], 3),
    (4, ((1, 2), (1, 3), (1, 4)), [1, 2, 3, 4], 1),
    (4, ((1, 2), (1, 3), (1, 4)), [2, 1, 3, 4], 2),
    (3, ((1, 2), (2, 3), (1, 3)), [1, 2, 3], 2),
    (4, ((1, 2), (2, 3), (3, 4)), [1, 2, 3, 4], 3),
])
def test_cover_prefix_length(n, edges, order, k):
    assert cover_prefix_length(PatternGraph(n, edges), order) == k


def test_vcbc_plan_shape(six_vertex):
    p, order = six_vertex
    plan = optimize_batch_plan(p, order, vcbc=True)
    assert plan.variant == "vcbc"
    assert plan.cover_len == 3
    assert str(plan.instructions[-1]) == "f:=ReportMatch(f1,C2,f3,C4,f5,C6)"
    assert sum(1 for i in plan.instructions if i.kind == ENU) == 2
    assert [(v, str(f)) for v, f in plan.dropped] == [("f6", "≠f2"), ("f4", "≠f2"), ("f4", "≠f6")]
    assert parse_plan(plan.dump()).dropped == plan.dropped


def test_vcbc_refuses_plans_without_kept_outputs(six_vertex):
    p, order = six_vertex
    plan = apply_vcbc(optimize_batch_plan(p, order), p, order)
    assert validate_plan(plan) == []


@pytest.mark.parametrize("i, k, ty", [(2, 1, "either"), (2, 2, "delta"), (2, 3, "unaltered")])
def test_edge_types(i, k, ty):
    assert edge_type(i, k) == ty


FFL_PLAN_2 = """\
f1:=Init(start)
ADO1:=GetAdj(f1,delta,out,*)
op,f3:=Foreach(ADO1)
AEO1:=GetAdj(f1,either,out,op)
AUI3:=GetAdj(f3,unaltered,in,op)
T2:=Intersect(AEO1,AUI3)
f2:=Foreach(T2)
f:=ReportMatch(f1,f2,f3)
"""


def test_incremental_plan_golden(ffl):
    plan = optimize_incremental_plan(ffl, 2, [1, 3, 2])
    assert _body(plan) == FFL_PLAN_2
    assert plan.delta_edge == 2
    assert validate_plan(plan) == []


def test_incremental_plan_checks_order_prefix(ffl):
    with pytest.raises(PlanError):
        generate_incremental_raw_plan(ffl, 2, [1, 2, 3])


def test_incremental_plan_rejects_triangle_cache(ffl):
    with pytest.raises(PlanError):
        apply_triangle_cache(generate_incremental_raw_plan(ffl, 1, [1, 2, 3]), ffl)


def test_incremental_reverse_edge_uses_membership_test():
    p = named_pattern("triangle")
    plan = optimize_incremental_plan(p, 1, [1, 2, 3])
    assert validate_plan(plan) == []
    two_cycle = PatternGraph(2, ((1, 2), (2, 1)), directed=True)
    body = _body(generate_incremental_raw_plan(two_cycle, 1, [1, 2]))
    assert "InSetTest(f1," in body
