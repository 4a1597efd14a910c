"""Execution-plan instructions, textual dump/parse and validation.

Surface syntax, one instruction per line::

    f1:=Init(start)
    A1:=GetAdj(f1)
    ADO1:=GetAdj(f1,delta,out,*)
    T7:=Intersect(A1,A3)
    C5:=Intersect(A1)|{>f3,≠f3}
    f3:=Foreach(A1)
    op,f3:=Foreach(C3)
    T6:=TCache(f1,f5,A1,A5)
    InSetTest(f1,AEO3)
    f:=ReportMatch(f1,f2,f3)

``V(G)`` stands for the whole vertex universe.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable

INI, DBQ, INT, ENU, DENU, TRC, INS, RES = "INI", "DBQ", "INT", "ENU", "DENU", "TRC", "INS", "RES"
KINDS = (INI, DBQ, INT, ENU, DENU, TRC, INS, RES)
UNIVERSE = "V(G)"
OP_VAR = "op"

# relative cost rank used by instruction reordering
KIND_RANK = {INI: 0, INT: 1, INS: 1, TRC: 2, DBQ: 3, ENU: 4, DENU: 4, RES: 5}

TYPE_LETTER = {"either": "E", "delta": "D", "unaltered": "U"}
DIR_LETTER = {"in": "I", "out": "O"}


class PlanSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Filter:
    """``>`` / ``<``: candidate must follow / precede ``subject`` in the total
    order; ``!=``: candidate must differ from ``subject``."""

    kind: str
    subject: str

    def __str__(self) -> str:
        return ("≠" if self.kind == "!=" else self.kind) + self.subject


@dataclass(frozen=True)
class Instruction:
    kind: str
    target: str | None
    operands: tuple[str, ...] = ()
    filters: tuple[Filter, ...] = ()
    # streaming DBQ only: (type, direction, op) with op in {"+", "-", "*", "op"}
    params: tuple[str, str, str] | None = None

    def uses(self) -> list[str]:
        """Variables read by this instruction."""
        used = [o for o in self.operands if o not in (UNIVERSE, "start")]
        used += [f.subject for f in self.filters]
        if self.params is not None and self.params[2] == OP_VAR:
            used.append(OP_VAR)
        return used

    def defines(self) -> list[str]:
        if self.kind == DENU:
            return [OP_VAR, self.target]
        return [self.target] if self.target else []

    def __str__(self) -> str:
        ops = ",".join(self.operands)
        if self.kind == INI:
            return f"{self.target}:=Init({ops})"
        if self.kind == DBQ:
            args = ops if self.params is None else ",".join((ops,) + self.params)
            return f"{self.target}:=GetAdj({args})"
        if self.kind == INT:
            text = f"{self.target}:=Intersect({ops})"
            if self.filters:
                text += "|{" + ",".join(map(str, self.filters)) + "}"
            return text
        if self.kind == ENU:
            return f"{self.target}:=Foreach({ops})"
        if self.kind == DENU:
            return f"op,{self.target}:=Foreach({ops})"
        if self.kind == TRC:
            return f"{self.target}:=TCache({ops})"
        if self.kind == INS:
            return f"InSetTest({ops})"
        return f"f:=ReportMatch({ops})"


@dataclass(frozen=True)
class ExecutionPlan:
    """Ordered instruction list bound to a matching order.

    ``variant`` is ``batch``, ``incremental`` (with ``delta_edge``) or
    ``vcbc`` (with ``cover_len``).  ``pinned`` names INT targets that must
    survive uni-operand elimination.  ``dropped`` records filters removed by
    compression, as ``(vertex_var, Filter)``, for result expansion.
    """

    instructions: tuple[Instruction, ...]
    order: tuple[int, ...]
    variant: str = "batch"
    delta_edge: int | None = None
    cover_len: int | None = None
    pinned: frozenset[str] = frozenset()
    dropped: tuple[tuple[str, Filter], ...] = ()
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def with_instructions(self, instructions: Iterable[Instruction], **changes) -> ExecutionPlan:
        return replace(self, instructions=tuple(instructions), **changes)

    def kinds(self) -> list[str]:
        return [ins.kind for ins in self.instructions]

    def dump(self) -> str:
        head = [f"# variant: {self.variant}", "# order: " + " ".join(map(str, self.order))]
        if self.delta_edge is not None:
            head.append(f"# delta_edge: {self.delta_edge}")
        if self.cover_len is not None:
            head.append(f"# cover_len: {self.cover_len}")
        if self.pinned:
            head.append("# pinned: " + " ".join(sorted(self.pinned)))
        for var, flt in self.dropped:
            head.append(f"# dropped: {var} {flt}")
        return "\n".join(head + [str(i) for i in self.instructions]) + "\n"

    def __str__(self) -> str:
        return self.dump()


def var_index(name: str) -> int | None:
    m = re.search(r"(\d+)$", name)
    return int(m.group(1)) if m else None


def fresh_index(plan_or_instrs, n: int) -> int:
    """Next unused variable index (shared across all namespaces)."""
    instrs = plan_or_instrs.instructions if isinstance(plan_or_instrs, ExecutionPlan) else plan_or_instrs
    top = n
    for ins in instrs:
        for name in ins.defines() + list(ins.operands):
            idx = var_index(name)
            if idx is not None and name not in ("start",):
                top = max(top, idx)
    return top + 1


def _parse_filter(text: str) -> Filter:
    text = text.strip()
    for sym, kind in (("≠", "!="), ("!=", "!="), ("≻", ">"), ("≺", "<"), (">", ">"), ("<", "<")):
        if text.startswith(sym):
            return Filter(kind, text[len(sym):].strip())
    raise PlanSyntaxError(f"bad filter {text!r}")


def _split_args(text: str) -> tuple[str, ...]:
    return tuple(a.strip() for a in text.split(",") if a.strip())


_LINE = re.compile(r"^(?:(?P<lhs>[^:=]+):=)?(?P<op>\w+)\((?P<args>.*)\)(?:\|\{(?P<filters>.*)\})?$")


def parse_instruction(line: str) -> Instruction:
    m = _LINE.match(line.strip().replace(" ", ""))
    if not m:
        raise PlanSyntaxError(f"cannot parse instruction {line!r}")
    lhs, op, args = m.group("lhs"), m.group("op"), m.group("args")
    operands = _split_args(args)
    filters = tuple(_parse_filter(f) for f in _split_args(m.group("filters") or ""))
    if op == "Init":
        return Instruction(INI, lhs, operands)
    if op == "GetAdj":
        if len(operands) == 4:
            return Instruction(DBQ, lhs, operands[:1], params=tuple(operands[1:]))
        return Instruction(DBQ, lhs, operands)
    if op == "Intersect":
        return Instruction(INT, lhs, operands, filters)
    if op == "Foreach":
        if lhs and lhs.startswith("op,"):
            return Instruction(DENU, lhs[3:], operands)
        return Instruction(ENU, lhs, operands)
    if op == "TCache":
        return Instruction(TRC, lhs, operands)
    if op == "InSetTest":
        return Instruction(INS, None, operands)
    if op == "ReportMatch":
        return Instruction(RES, None, operands)
    raise PlanSyntaxError(f"unknown operation {op!r}")


def parse_plan(text: str) -> ExecutionPlan:
    """Inverse of :meth:`ExecutionPlan.dump`."""
    instrs = []
    meta: dict[str, str] = {}
    dropped = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            key = key.strip()
            if key == "dropped":
                var, flt = value.split()
                dropped.append((var, _parse_filter(flt)))
            else:
                meta[key] = value.strip()
            continue
        instrs.append(parse_instruction(line))
    return ExecutionPlan(
        tuple(instrs),
        tuple(int(x) for x in meta.get("order", "").split()),
        meta.get("variant", "batch"),
        int(meta["delta_edge"]) if "delta_edge" in meta else None,
        int(meta["cover_len"]) if "cover_len" in meta else None,
        frozenset(meta.get("pinned", "").split()),
        tuple(dropped),
    )


def validate_plan(plan: ExecutionPlan) -> list[str]:
    """Structural checks; returns one diagnostic string per violation."""
    diags: list[str] = []
    instrs = plan.instructions
    kinds = [i.kind for i in instrs]
    if kinds.count(INI) != 1:
        diags.append(f"expected exactly one INI, found {kinds.count(INI)}")
    if kinds.count(RES) != 1:
        diags.append(f"expected exactly one RES, found {kinds.count(RES)}")
    elif kinds[-1] != RES:
        diags.append("RES is not the last instruction")
    defined: set[str] = set()
    dbq_of: dict[str, str] = {}
    ini_target = None
    for pos, ins in enumerate(instrs, start=1):
        if ins.kind not in KINDS:
            diags.append(f"instruction {pos}: unknown kind {ins.kind}")
            continue
        for name in ins.operands:
            if name in (UNIVERSE, "start"):
                continue
            if name not in defined:
                diags.append(f"use before def {name} (instruction {pos})")
        for flt in ins.filters:
            if flt.subject not in defined:
                diags.append(f"filter subject {flt.subject} not available (instruction {pos})")
        if ins.params is not None and ins.params[2] == OP_VAR and OP_VAR not in defined:
            diags.append(f"use before def op (instruction {pos})")
        if ins.kind == INI:
            ini_target = ins.target
        if ins.kind == DBQ:
            dbq_of[ins.target] = ins.operands[0]
        if ins.kind == TRC:
            if plan.variant == "incremental":
                diags.append(f"TRC not allowed in incremental plan (instruction {pos})")
            if len(ins.operands) != 4:
                diags.append(f"TRC needs 4 operands (instruction {pos})")
            else:
                fi, fj, ai, aj = ins.operands
                if ini_target not in (fi, fj):
                    diags.append(f"TRC at instruction {pos} is not anchored at the starting vertex")
                if dbq_of.get(ai) != fi or dbq_of.get(aj) != fj:
                    diags.append(f"TRC at instruction {pos} does not pair adjacency sets with their vertices")
        for name in ins.defines():
            if name in defined and name != OP_VAR:
                diags.append(f"variable {name} redefined (instruction {pos})")
            defined.add(name)
    if plan.order:
        if sorted(plan.order) != list(range(1, len(plan.order) + 1)):
            diags.append("matching order is not a permutation")
        elif ini_target is not None and ini_target != f"f{plan.order[0]}":
            diags.append(f"INI binds {ini_target}, expected f{plan.order[0]}")
    if plan.variant == "incremental":
        denus = [i for i in instrs if i.kind == DENU]
        if len(denus) != 1:
            diags.append(f"incremental plan needs exactly one DeltaENU, found {len(denus)}")
        elif len(plan.order) >= 2 and denus[0].target != f"f{plan.order[1]}":
            diags.append(f"DeltaENU binds {denus[0].target}, expected f{plan.order[1]}")
        first_dbq = next((i for i in instrs if i.kind == DBQ), None)
        if first_dbq is None or first_dbq.params is None or first_dbq.params[0] != "delta" or first_dbq.params[2] != "*":
            diags.append("incremental plan must start with a delta adjacency query of the first vertex")
    return diags
