"""Shared fixtures and the acceptance summary printed at the end of a run."""

import pytest

from flexonc import FlowId
from flexonc.topology import build_grid, compute_routes, from_positions, routing_view

from support import ACCEPTANCE, EIGHT_NODE_POSITIONS


@pytest.fixture
def eight():
    return from_positions(dict(enumerate(EIGHT_NODE_POSITIONS)))


@pytest.fixture
def eight_routes(eight):
    return compute_routes(eight, [FlowId(0, 4, 1), FlowId(4, 0, 2)])


@pytest.fixture
def eight_view(eight, eight_routes):
    return lambda node: routing_view(eight_routes, eight, node)


@pytest.fixture
def twelve():
    return build_grid(3, 4, 150.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        tr.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail}")
    passed = sum(1 for _, ok, _ in ACCEPTANCE.values() if ok)
    tr.write_line(f"{passed}/{len(ACCEPTANCE)} criteria passed")
