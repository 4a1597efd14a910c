from __future__ import annotations

import io

from sgenum.cli import main
from sgenum.generators import erdos_renyi
from sgenum.report import SIX_VERTEX, cache_sweep, pruning_sweep, write_table


def test_quick_report_writes_tables_and_figures(tmp_path):
    out = io.StringIO()
    assert main(["report", "--out", str(tmp_path), "--quick"], out) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["cache_sweep.png", "cache_sweep.tsv", "pruning.png", "pruning.tsv", "split_sweep.png",
                     "split_sweep.tsv"]
    assert (tmp_path / "cache_sweep.png").read_bytes()[:4] == b"\x89PNG"
    header = (tmp_path / "split_sweep.tsv").read_text().splitlines()[0]
    assert header == "theta\ttasks\tmatches\tmax_worker_s\tmean_worker_s\tmax_over_mean"


def test_cache_sweep_is_monotone():
    rows = cache_sweep(SIX_VERTEX.with_symmetry_breaking(), erdos_renyi(80, 6, 1))
    queries = [r["backend_queries"] for r in rows]
    assert queries == sorted(queries, reverse=True)
    assert len({r["matches"] for r in rows}) == 1


def test_pruning_sweep_shape():
    rows = pruning_sweep(4)
    assert [r["n"] for r in rows] == [2, 3, 4]
    assert [r["patterns"] for r in rows] == [1, 2, 6]


def test_write_table(tmp_path):
    path = tmp_path / "t.tsv"
    write_table([{"a": 1, "b": "x"}, {"a": 2, "b": "y"}], path)
    assert path.read_text() == "a\tb\n1\tx\n2\ty\n"
    write_table([], path)
    assert path.read_text() == ""
