"""Experiment sweeps rendered as tab-separated tables plus matplotlib figures."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .executor import EngineConfig, enumerate_matches  # noqa: E402
from .generators import connected_patterns, erdos_renyi, hub_graph  # noqa: E402
from .graph import PatternGraph  # noqa: E402
from .optimizer import GraphStats, SearchStats, best_execution_plan  # noqa: E402
from .storage import graph_bytes  # noqa: E402

__all__ = ["cache_sweep", "split_sweep", "pruning_sweep", "write_table", "write_report"]

SIX_VERTEX = PatternGraph(6, ((1, 2), (1, 3), (1, 5), (1, 6), (2, 3), (5, 6), (1, 4), (3, 4), (4, 5)))
WEDGE = PatternGraph(3, ((1, 2), (1, 3))).with_symmetry_breaking()


def cache_sweep(p: PatternGraph, g, fractions=(0.01, 0.1, 0.5, 1.0), order=None) -> list[dict]:
    """Backend queries for cache budgets given as fractions of the graph bytes."""
    total = graph_bytes(g)
    rows = []
    for frac in fractions:
        cfg = EngineConfig(workers=1, cache_bytes=int(total * frac), theta=None, order=order)
        r = enumerate_matches(p, g, cfg)
        rows.append({"cache_fraction": frac, "cache_bytes": int(total * frac), "matches": r.count,
                     "dbq_issued": r.metrics.dbq_issued, "backend_queries": r.metrics.backend_queries,
                     "hit_rate": round(r.metrics.hit_rate, 6)})
    return rows


def split_sweep(p: PatternGraph, g, thetas=(None, 500, 50, 5), workers: int = 4, order=None) -> list[dict]:
    rows = []
    for theta in thetas:
        r = enumerate_matches(p, g, EngineConfig(workers=workers, theta=theta, order=order))
        mean = sum(r.worker_times) / len(r.worker_times)
        rows.append({"theta": "inf" if theta is None else theta, "tasks": r.tasks, "matches": r.count,
                     "max_worker_s": round(max(r.worker_times), 6), "mean_worker_s": round(mean, 6),
                     "max_over_mean": round(max(r.worker_times) / mean, 6) if mean else 1.0})
    return rows


def pruning_sweep(max_n: int = 5, stats: GraphStats | None = None) -> list[dict]:
    """Mean fraction of admissible matching orders the search completes, per n."""
    stats = stats or GraphStats(100_000, 1_000_000)
    by_n: dict[int, list[float]] = {}
    for p in connected_patterns(max_n, min_n=2):
        st = SearchStats()
        best_execution_plan(p, stats, search_stats=st)
        by_n.setdefault(p.n, []).append(st.explored_fraction)
    return [{"n": n, "patterns": len(v), "mean_explored_fraction": round(sum(v) / len(v), 6)}
            for n, v in sorted(by_n.items())]


def write_table(rows: list[dict], path: Path) -> None:
    if not rows:
        path.write_text("")
        return
    cols = list(rows[0])
    lines = ["\t".join(cols)] + ["\t".join(str(r[c]) for c in cols) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def _plot(path: Path, xs, ys, xlabel: str, ylabel: str, title: str, log_x: bool = False) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.plot(xs, ys, marker="o")
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(out_dir: str | Path, seed: int = 0, workers: int = 4, quick: bool = False) -> list[Path]:
    """Run all sweeps, writing ``*.tsv`` and ``*.png`` pairs; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    n = 80 if quick else 200
    g = erdos_renyi(n, 8, seed)
    rows = cache_sweep(SIX_VERTEX.with_symmetry_breaking(), g)
    write_table(rows, out / "cache_sweep.tsv")
    _plot(out / "cache_sweep.png", [r["cache_fraction"] * 100 for r in rows], [r["backend_queries"] for r in rows],
          "cache capacity (% of graph bytes)", "backend queries", "Cache budget", log_x=True)
    written += [out / "cache_sweep.tsv", out / "cache_sweep.png"]

    hub = hub_graph(1200 if not quick else 400, 1000 if not quick else 300, 2, seed)
    rows = split_sweep(WEDGE, hub, workers=workers, order=(1, 2, 3))
    write_table(rows, out / "split_sweep.tsv")
    labels = [str(r["theta"]) for r in rows]
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.bar(labels, [r["max_over_mean"] for r in rows])
    ax.set_xlabel("split threshold")
    ax.set_ylabel("max / mean worker time")
    ax.set_title("Task splitting")
    fig.tight_layout()
    fig.savefig(out / "split_sweep.png", dpi=120)
    plt.close(fig)
    written += [out / "split_sweep.tsv", out / "split_sweep.png"]

    rows = pruning_sweep(4 if quick else 5)
    write_table(rows, out / "pruning.tsv")
    _plot(out / "pruning.png", [r["n"] for r in rows], [r["mean_explored_fraction"] for r in rows],
          "pattern vertices", "explored fraction of orders", "Search pruning")
    written += [out / "pruning.tsv", out / "pruning.png"]
    return written
