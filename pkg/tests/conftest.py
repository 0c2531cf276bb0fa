import random
from fractions import Fraction as F
from pathlib import Path

import pytest

from sponsored_suggestions import (
    gen_poa_instance, gen_proxy_counterexample, gen_running_shoes, random_instance,
)

FIXTURES = Path(__file__).parent / "fixtures"
RANDOM_SEEDS = range(200)


def named_corpus():
    out = [("running-shoes", gen_running_shoes())]
    out += [(f"poa-m{m}", gen_poa_instance(m, F(1, m * m))) for m in (3, 5, 10)]
    out.append(("proxy", gen_proxy_counterexample()))
    return out


def random_corpus():
    return [(f"random-{s}", random_instance(random.Random(s))) for s in RANDOM_SEEDS]


@pytest.fixture(scope="session")
def corpus():
    return named_corpus() + random_corpus()


@pytest.fixture(scope="session")
def shoes():
    return gen_running_shoes()


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# one summary line per acceptance criterion, whatever the verbosity
_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by a test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            item.user_properties.append(("criterion", mark.args))


def pytest_runtest_logreport(report):
    for key, value in report.user_properties:
        if key != "criterion":
            continue
        n, title = value
        entry = _CRITERIA.setdefault(n, [title, True])
        if report.failed:
            entry[1] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}")
