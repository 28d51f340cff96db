import pytest

from faceopt.evaluators import QuadraticBowl
from faceopt.facesim import FaceSimulator
from faceopt.space import ParameterSpace, grouped


@pytest.fixture(scope="session")
def space():
    return ParameterSpace.default()


@pytest.fixture(scope="session")
def toy_space():
    return grouped([[1], [2]], lower=0, upper=7)


@pytest.fixture(scope="session")
def sim(space):
    return FaceSimulator(space)


@pytest.fixture
def bowl():
    return QuadraticBowl([5, 2], [1, 2], 0, 7)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion; returns ``ok``."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
