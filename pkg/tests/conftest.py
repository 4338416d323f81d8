import pytest

from csbm.model import derive_params, sample_contextual, sample_gaussian


@pytest.fixture(scope="session")
def small_sbm():
    return sample_contextual(derive_params(200, 250, 5, 0.8, 0.7), 3)


@pytest.fixture(scope="session")
def tiny_sbm():
    return sample_contextual(derive_params(50, 40, 4, 1.0, 0.6), 11)


@pytest.fixture(scope="session")
def small_gaussian():
    return sample_gaussian(derive_params(120, 100, 1, 1.1, 0.9, check_graph=False), 5)


_CRITERIA: dict = {}


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for an acceptance criterion.

    Usage: ``criterion(3, ok, "detail")``.  The verdict is printed right away
    (visible with ``-s``) and again in the terminal summary.
    """
    def record(number, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _CRITERIA[str(number)] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: (int(k.rstrip("ab")), k)):
        terminalreporter.write_line(_CRITERIA[key])
