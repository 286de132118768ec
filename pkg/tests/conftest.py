import pytest

from adaptive_cac.chain import SchemePolicy
from adaptive_cac.traffic import CellParameters, TrafficClass, TrafficMix, table1_mix

ERLANG_B_10_5 = 0.018385  # Erlang-B with 10 servers at 5 Erlangs, 6 decimals

ALL_POLICIES = [
    SchemePolicy.proposed(),
    SchemePolicy.non_prioritized(),
    SchemePolicy.hard(),
    SchemePolicy.hard_guard(0.05),
]


@pytest.fixture
def single_mix():
    """One elastic class: 100 kbit/s, new cap 0.2, handover cap 0.5."""
    return TrafficMix([TrafficClass("elastic", 1.0, 100.0, 0.2, 0.5)])


@pytest.fixture
def single_cell():
    # 1/mu = 120 s, 1/eta = 240 s, total arrivals 0.0625/s (5 Erlangs at full rate)
    return CellParameters(1000.0, 0.0625 * 2 / 3, 0.0625 / 3)


@pytest.fixture
def rt_mix():
    return TrafficMix([TrafficClass("voice", 1.0, 100.0)])


@pytest.fixture
def ref_mix():
    return table1_mix()


# one summary line per acceptance criterion

_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    passed = call.excinfo is None
    prev = _acceptance.get(number)
    _acceptance[number] = (title, passed and (prev is None or prev[1]))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, passed = _acceptance[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}")
