import os

import pytest

from surfacewalk.group import GroupPresentation, ball_enumerate, radial_tree_ball


def pytest_configure(config):
    os.environ.setdefault("NUMBA_CACHE_DIR", os.path.join(os.path.dirname(__file__), ".numba"))


@pytest.fixture(scope="session")
def gamma2():
    return GroupPresentation(2)


@pytest.fixture(scope="session")
def free2():
    return GroupPresentation(2, surface=False)


@pytest.fixture(scope="session")
def ball5(gamma2):
    return ball_enumerate(gamma2, 5)


@pytest.fixture(scope="session")
def ball6(gamma2):
    return ball_enumerate(gamma2, 6)


@pytest.fixture(scope="session")
def lumped6(gamma2):
    return ball_enumerate(gamma2, 6, lumped=True)


@pytest.fixture(scope="session")
def free_ball6(free2):
    return ball_enumerate(free2, 6)


@pytest.fixture(scope="session")
def tree12():
    return radial_tree_ball(2, 12)


@pytest.fixture(scope="session")
def aut2(gamma2, lumped6):
    """ShortLex automaton of Gamma_2 (about 40 s), validated on B(6)."""
    from surfacewalk.automaton import build_automaton
    return build_automaton(gamma2, validate_radius=6, counts=lumped6.sphere_counts())


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria (measured values)")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
