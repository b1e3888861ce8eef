from pathlib import Path

import pytest

from netshard.core import Endpoint, PartStateCell, address

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def scenario_path(name: str) -> Path:
    return SCENARIOS / f"{name}.json"


def ep(shard: int, ee: int, label: str) -> Endpoint:
    return Endpoint(shard, ee, address(label))


def matrix(rows):
    """Build a part-state matrix from nested lists of balances."""
    return [[PartStateCell(b) for b in row] for row in rows]


@pytest.fixture
def scenarios_dir() -> Path:
    return SCENARIOS


# -- acceptance reporting -------------------------------------------------------
# Tests marked ``criterion(n, title)`` get one PASS/FAIL line in the summary.

_criteria: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    entry = _criteria.setdefault(n, [title, True])
    if rep.failed or (rep.when == "call" and rep.skipped):
        entry[1] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, ok = _criteria[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {title}")
