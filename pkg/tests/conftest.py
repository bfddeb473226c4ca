import pytest
from hypothesis import settings

from hypbill.geometry import BilliardTable, CircleWall, MetricField

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    print(line)
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


FLAT = MetricField(1.0, 1.0, ())
BUMP = MetricField(1.0, 1.0, ((1, 1, 0.05, 0.0), (1, -1, 0.05, 0.0)))


def harness(K: float, scale: float = 1.0) -> MetricField:
    return MetricField(scale, scale, (), curvature_override=K)


@pytest.fixture(scope="session")
def flat_metric():
    return FLAT


@pytest.fixture(scope="session")
def bump_metric():
    return BUMP


@pytest.fixture(scope="session")
def two_disk():
    return BilliardTable(FLAT, (CircleWall((0.0, 0.0), 0.3), CircleWall((0.5, 0.5), 0.3)), "two")


@pytest.fixture(scope="session")
def one_disk():
    return BilliardTable(FLAT, (CircleWall((0.5, 0.5), 0.3),), "one")


@pytest.fixture(scope="session")
def four_disk():
    return BilliardTable(
        FLAT,
        (CircleWall((0.0, 0.0), 0.35), CircleWall((0.5, 0.5), 0.35),
         CircleWall((0.5, 0.0), 0.1), CircleWall((0.0, 0.5), 0.1)),
        "four",
    )


@pytest.fixture(scope="session")
def empty_flat():
    return BilliardTable(FLAT, (), "empty")


@pytest.fixture(scope="session")
def bump_table():
    return BilliardTable(BUMP, (CircleWall((0.5, 0.5), 0.2),), "bump")
