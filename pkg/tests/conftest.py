import pytest

_criteria: dict[str, list[bool]] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    _criteria.setdefault(marker.args[0], []).append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_criteria, key=lambda s: int(s.split()[0][2:])):
        status = "PASS" if all(_criteria[label]) else "FAIL"
        terminalreporter.write_line(f"{status}  {label}")


@pytest.fixture(scope="session", autouse=True)
def _warm_numba():
    # compile the permanent kernels once so timing tests measure steady-state work
    import numpy as np

    from timebin.fockcore import output_distribution, permanent

    permanent(np.eye(2, dtype=complex))
    output_distribution(np.eye(4), (1, 1, 0, 0))
    output_distribution(np.eye(4), (1, 1, 0, 0), model="distinguishable")
