"""Command-line entry point: ``sgenum {plan,run,verify,report}``."""

from __future__ import annotations

import argparse
import sys
import time
from importlib import resources
from pathlib import Path

from .compiler import (
    PlanError,
    apply_triangle_cache,
    apply_vcbc,
    eliminate_common_subexpressions,
    generate_raw_plan,
    optimize_batch_plan,
    reorder_instructions,
)
from .executor import EngineConfig, enumerate_matches
from .generators import erdos_renyi, random_directed, random_update_batches
from .graph import CapabilityError, GraphFormatError, PatternGraph, load_edge_list, load_pattern
from .optimizer import GraphStats, best_execution_plan, best_incremental_plans, estimate_computation_cost, \
    estimate_communication_cost
from .oracle import brute_force_enumerate, brute_force_incremental, canonical
from .plan import INT, TRC, UNIVERSE, ExecutionPlan, Instruction
from .storage import ConsistencyError, graph_bytes
from .streaming import StreamConfig, StreamingEngine, parse_update_stream

EXIT_FAIL = 1
EXIT_USAGE = 2


def bundled(name: str) -> str:
    """Path of a bundled fixture, e.g. ``toy_graph.txt``."""
    return str(resources.files("sgenum") / "data" / name)


def _resolve(path: str | None) -> str | None:
    if path and path.startswith("bundled:"):
        return bundled(path[len("bundled:"):])
    return path


def _parse_order(text: str | None) -> list[int] | None:
    if not text:
        return None
    return [int(x.lstrip("u")) for x in text.replace(",", " ").split()]


def _parse_theta(text: str) -> int | None:
    if text.lower() in ("inf", "none", "off"):
        return None
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("theta must be >= 1 or 'inf'")
    return value


def _parse_seeds(text: str | None) -> list[int]:
    if text is None:
        return []
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


def _cache_bytes(text: str | None, total: int) -> int | None:
    if text is None:
        return None
    if text.endswith("%"):
        return int(total * float(text[:-1]) / 100)
    value = int(text)
    if value < 0:
        raise ValueError("cache capacity must be nonnegative")
    return value


def _write_kv(pairs: dict, out) -> None:
    for k, v in pairs.items():
        out.write(f"{k}\t{v}\n")


def _load_pattern(args) -> tuple[PatternGraph, list[int] | None]:
    with open(_resolve(args.pattern)) as fh:
        p, order = load_pattern(fh)
    cli_order = _parse_order(args.order)
    return p, cli_order if cli_order is not None else order


def _batch_graph(args, seed: int | None = None):
    if args.data:
        with open(_resolve(args.data)) as fh:
            return load_edge_list(fh)
    s = seed if seed is not None else (_parse_seeds(args.seed) or [0])[0]
    return erdos_renyi(args.gen_n, args.gen_degree, s)


def _stream_input(args, seed: int | None = None):
    if args.data:
        with open(_resolve(args.data)) as fh:
            return parse_update_stream(fh)
    s = seed if seed is not None else (_parse_seeds(args.seed) or [0])[0]
    g = random_directed(args.gen_n, int(args.gen_n * args.gen_degree), s)
    return g, random_update_batches(g, args.gen_steps, args.gen_batch, s + 1)


def inject_fault(plan: ExecutionPlan) -> ExecutionPlan:
    """Debug aid: replace one adjacency operand of the last set computation
    with the vertex universe, so the plan reports non-matches."""
    instrs = list(plan.instructions)
    for pos in range(len(instrs) - 1, -1, -1):
        ins = instrs[pos]
        if ins.kind == TRC:
            instrs[pos] = Instruction(INT, ins.target, (ins.operands[2], UNIVERSE))
            return plan.with_instructions(instrs)
        if ins.kind == INT and any(o.startswith("A") for o in ins.operands):
            ops = list(ins.operands)
            idx = max(i for i, o in enumerate(ops) if o.startswith("A"))
            ops[idx] = UNIVERSE
            instrs[pos] = Instruction(INT, ins.target, tuple(ops), ins.filters, ins.params)
            return plan.with_instructions(instrs)
    return plan


def cmd_plan(args, out) -> int:
    p, order = _load_pattern(args)
    stats = GraphStats(args.stats_n, args.stats_m)
    if p.directed:
        for i, (plan, cost) in enumerate(best_incremental_plans(p, stats), start=1):
            out.write(f"## incremental plan {i}\n")
            out.write(plan.dump())
            _write_kv({"comm_cost": f"{cost.comm_cost:.6g}", "comp_cost": f"{cost.comp_cost:.6g}"}, out)
        return 0
    if order is None:
        _, cost = best_execution_plan(p, stats)
        order = list(cost.order)
    stages = {}
    stages["raw"] = generate_raw_plan(p, order)
    stages["cse"] = eliminate_common_subexpressions(stages["raw"])
    stages["reordered"] = reorder_instructions(stages["cse"])
    stages["triangle_cache"] = apply_triangle_cache(stages["reordered"], p)
    stages["vcbc"] = apply_vcbc(apply_triangle_cache(reorder_instructions(eliminate_common_subexpressions(
        generate_raw_plan(p, order, keep_outputs=True))), p), p, order)
    for name, plan in stages.items():
        out.write(f"## {name}\n")
        out.write(plan.dump())
    final = stages["triangle_cache"]
    _write_kv({"comm_cost": f"{estimate_communication_cost(p, final, stats):.6g}",
               "comp_cost": f"{estimate_computation_cost(p, final, stats):.6g}",
               "order": " ".join(map(str, order))}, out)
    if args.dump_plan:
        Path(args.dump_plan).write_text(final.dump())
    return 0


def _engine_config(args, g) -> EngineConfig:
    return EngineConfig(workers=args.workers, theta=args.theta, cache_bytes=_cache_bytes(args.cache, graph_bytes(g)),
                        sink=args.sink, order=_parse_order(args.order) or None, vcbc=args.sink == "emit-compressed")


def cmd_run(args, out) -> int:
    p, order = _load_pattern(args)
    t0 = time.perf_counter()
    metrics: dict = {}
    if args.mode == "batch":
        g = _batch_graph(args)
        cfg = _engine_config(args, g)
        cfg.order = order
        result = enumerate_matches(p, g, cfg)
        if args.dump_plan:
            Path(args.dump_plan).write_text(result.plan.dump())
        metrics = result.summary()
        if args.sink != "count":
            for item in result.items:
                out.write(result.sink.format_item(item) + "\n")
    else:
        g, batches = _stream_input(args)
        capacity = _cache_bytes(args.cache, 2 * graph_bytes(g.to_undirected()))
        engine = StreamingEngine(p, g, StreamConfig(workers=args.workers, theta=args.theta,
                                                    cache_bytes=capacity if capacity is not None else 1 << 26))
        if args.dump_plan:
            Path(args.dump_plan).write_text("".join(plan.dump() for plan in engine.plans))
        plus_total = minus_total = 0
        for batch in batches:
            r = engine.step(batch)
            out.write(f"## step {r.t}\tappearing\t{len(r.appearing)}\tdisappearing\t{len(r.disappearing)}\n")
            if args.sink != "count":
                for f in sorted(r.appearing):
                    out.write("+ " + " ".join(map(str, f)) + "\n")
                for f in sorted(r.disappearing):
                    out.write("- " + " ".join(map(str, f)) + "\n")
            if r.violations:
                out.write("".join(f"violation\t{v}\n" for v in r.violations))
            plus_total += len(r.appearing)
            minus_total += len(r.disappearing)
        metrics = {"steps": len(batches), "appearing": plus_total, "disappearing": minus_total}
        metrics.update(engine.metrics.as_dict())
    metrics["wall_time_s"] = round(time.perf_counter() - t0, 6)
    _write_kv(metrics, out)
    if args.metrics:
        with open(args.metrics, "w") as fh:
            _write_kv(metrics, fh)
    return 0


def _first_divergence(engine_set, oracle_set) -> str:
    extra = sorted(engine_set - oracle_set)
    missing = sorted(oracle_set - engine_set)
    if extra:
        return f"extra subgraph {extra[0]}"
    return f"missing subgraph {missing[0]}"


def cmd_verify(args, out) -> int:
    p, order = _load_pattern(args)
    seeds = _parse_seeds(args.seed) if not args.data else [None]
    failures = 0
    for seed in seeds or [None]:
        label = f"seed {seed}" if seed is not None else "data"
        if args.mode == "batch":
            g = _batch_graph(args, seed)
            cfg = _engine_config(args, g)
            cfg.sink, cfg.vcbc, cfg.order = "emit", False, order
            plan = None
            if args.inject_fault:
                plan_order = order or list(best_execution_plan(p, GraphStats.of(g))[1].order)
                plan = inject_fault(optimize_batch_plan(p, plan_order))
            result = enumerate_matches(p, g, cfg, plan=plan)
            got = [canonical(p, f) for f in result.items]
            truth = brute_force_enumerate(p, g)
            dupes = len(got) - len(set(got))
            if set(got) == truth and dupes == 0:
                out.write(f"PASS\t{label}\tsubgraphs\t{len(truth)}\n")
            else:
                failures += 1
                why = _first_divergence(set(got), truth) if set(got) != truth else f"{dupes} duplicate reports"
                out.write(f"FAIL\t{label}\t{why}\n")
        else:
            g, batches = _stream_input(args, seed)
            engine = StreamingEngine(p, g, StreamConfig(workers=args.workers, theta=args.theta))
            arcs = set(g.edges())
            ok = True
            for batch in batches:
                r = engine.step(batch)
                new = batch.apply(arcs)
                plus, minus = brute_force_incremental(p, arcs, new)
                gp = {canonical(p, f) for f in r.appearing}
                gm = {canonical(p, f) for f in r.disappearing}
                if gp != plus or gm != minus or r.violations:
                    ok = False
                    why = (r.violations[0] if r.violations else
                           _first_divergence(gp, plus) if gp != plus else _first_divergence(gm, minus))
                    out.write(f"FAIL\t{label}\tstep {r.t}\t{why}\n")
                    break
                arcs = new
            if ok:
                out.write(f"PASS\t{label}\tsteps\t{len(batches)}\n")
            else:
                failures += 1
    return EXIT_FAIL if failures else 0


def cmd_report(args, out) -> int:
    from .report import write_report

    seed = (_parse_seeds(args.seed) or [0])[0]
    for path in write_report(args.out, seed=seed, workers=args.workers, quick=args.quick):
        out.write(f"wrote\t{path}\n")
        if path.suffix == ".tsv":
            out.write(path.read_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgenum", description="Compile and run subgraph enumeration plans.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, pattern_required=True):
        sp.add_argument("--pattern", required=pattern_required, help="pattern file (or bundled:<name>)")
        sp.add_argument("--data", help="edge list (batch) or update stream (stream); bundled:<name> allowed")
        sp.add_argument("--mode", choices=("batch", "stream"), default="batch")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--cache", help="cache capacity in bytes or as a percentage, e.g. 10%%")
        sp.add_argument("--theta", type=_parse_theta, default=500, help="split threshold, or 'inf'")
        sp.add_argument("--order", help="matching order override, e.g. 1,3,5,2,6,4")
        sp.add_argument("--sink", choices=("count", "emit", "emit-compressed"), default="count")
        sp.add_argument("--dump-plan", help="write the executed plan to this path")
        sp.add_argument("--metrics", help="write the key/value metrics report to this path")
        sp.add_argument("--seed", help="seed for generated data; verify accepts ranges like 1..20")
        sp.add_argument("--gen-n", type=int, default=40, help="vertices of generated data")
        sp.add_argument("--gen-degree", type=float, default=4.0, help="mean degree of generated data")
        sp.add_argument("--gen-steps", type=int, default=10, help="generated stream steps")
        sp.add_argument("--gen-batch", type=int, default=50, help="generated updates per step")

    sp = sub.add_parser("plan", help="print raw and optimized plans with cost estimates")
    common(sp)
    sp.add_argument("--stats-n", type=int, default=100_000, help="N used by the cost model")
    sp.add_argument("--stats-m", type=int, default=1_000_000, help="M used by the cost model")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("run", help="enumerate matches and print counts and metrics")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("verify", help="compare the engine with the brute-force oracle")
    common(sp)
    sp.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("report", help="run the sweeps and write TSV tables and PNG figures")
    common(sp, pattern_required=False)
    sp.add_argument("--out", default="report", help="output directory")
    sp.add_argument("--quick", action="store_true", help="smaller inputs")
    sp.set_defaults(func=cmd_report, workers=4)
    return parser


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except (GraphFormatError, PlanError, ConsistencyError, CapabilityError, OSError, ValueError) as exc:
        sys.stderr.write(f"sgenum: error: {exc}\n")
        return EXIT_USAGE if not isinstance(exc, CapabilityError) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
