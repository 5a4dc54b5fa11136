import os
import sys
from importlib import resources

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from scencomplex.scenario import parse_scenario_file  # noqa: E402
from scencomplex.taxonomy import default_catalog  # noqa: E402

FIXTURE_DIR = str(resources.files("scencomplex").joinpath("data/scenarios"))
FIXTURES = sorted(n[:-4] for n in os.listdir(FIXTURE_DIR) if n.endswith(".scn"))
WORKED_FIXTURES = [n for n in FIXTURES if n.startswith("ex")]
GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")

_acceptance = {}


def fixture_path(name):
    return os.path.join(FIXTURE_DIR, name + ".scn")


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def scenarios():
    return {n: parse_scenario_file(fixture_path(n)) for n in FIXTURES}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    name = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        prev = _acceptance.get(name, True)
        _acceptance[name] = prev and rep.outcome == "passed"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in _acceptance.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}")
