import numpy as np
import pytest

from lcrlab.maps import composed_map, linear_map, quadratic_map, shear_map
from lcrlab.spaces import euclidean, linf, lp

ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)


QUADRATIC_Q = [[[0.0, 0.25], [0.25, 0.0]], [[0.5, 0.0], [0.0, 0.25]]]


def registry_maps():
    """One representative of every family, in several spaces."""
    return {
        "shear-0.5": shear_map(0.5),
        "shear-1": shear_map(1.0),
        "shear-2": shear_map(2.0),
        "shear-4": shear_map(4.0),
        "shear-3d": shear_map(2.0, space=euclidean(3)),
        "quadratic": quadratic_map(QUADRATIC_Q),
        "linear": linear_map([[2.0, 1.0], [0.0, 0.5]]),
        "linear-2I": linear_map(2.0 * np.eye(2)),
        "composed": composed_map([[1.0, 0.5], [0.0, 1.0]], shear_map(1.0)),
        "shear-lp1.5": shear_map(1.0, space=lp(2, 1.5)),
        "shear-linf": shear_map(1.0, space=linf(2)),
    }


@pytest.fixture(scope="session")
def maps():
    return registry_maps()
