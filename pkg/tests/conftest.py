from pathlib import Path

import pytest

from dnspde.config import parse_config, parse_text

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def standard():
    """Standard fixture with a short horizon for unit tests."""
    return parse_text("sim.T = 0.05\nsim.paths = 4\n").sim


@pytest.fixture
def config_dir():
    return CONFIGS


def load(name, **overrides):
    rc = parse_config(CONFIGS / name)
    return rc.with_overrides(**overrides) if overrides else rc


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one criterion outcome; the lines are printed after the run."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(criterion, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
