from __future__ import annotations

import pytest

from sgenum.cli import bundled
from sgenum.graph import load_edge_list, load_pattern

# criterion number -> "PASS criterion k: ..." line, filled by test_acceptance
VERDICTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance")
    for k in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[k])


@pytest.fixture
def toy_graph():
    with open(bundled("toy_graph.txt")) as fh:
        return load_edge_list(fh)


@pytest.fixture
def six_vertex():
    """The six-vertex pattern with its bundled matching order."""
    with open(bundled("six_vertex_pattern.txt")) as fh:
        return load_pattern(fh)


@pytest.fixture
def ffl():
    with open(bundled("ffl_pattern.txt")) as fh:
        return load_pattern(fh)[0]
