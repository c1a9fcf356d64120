import pytest

from scenelang import fixtures as fx
from scenelang.prompting import load_assets

NAMED_TEMPLATES = [t for t in fx.TEMPLATES if t != "random"]


@pytest.fixture(scope="session")
def assets():
    return load_assets()


@pytest.fixture(scope="session")
def generated():
    """template -> (scenario, expectation) with default parameters."""
    return {t: fx.generate(fx.FixtureSpec(t)) for t in fx.TEMPLATES}


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[n])
