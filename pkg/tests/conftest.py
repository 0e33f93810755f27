import numpy as np
import pytest

from mvac.field import reflection_field, rotation_field
from mvac.grid import Grid

ACCEPTANCE = []


@pytest.fixture
def acceptance_report():
    """Record one summary line per acceptance criterion."""
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)


def disk_field(N, radius, eta=0.0, centre=(0.0, 0.0)):
    """Rotations inside a disk, reflections outside."""
    x1, x2 = Grid(N).coords
    inside = np.hypot(x1 - centre[0], x2 - centre[1]) < radius
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (N, N))
    return np.where(inside[..., None, None], rotation_field(eta), reflection_field(eta))


def strip_field(N, eta_outer, eta_inner, half_width=0.25):
    x1, x2 = Grid(N).coords
    outer = np.broadcast_to(eta_outer(x1, x2), (N, N))
    inner = np.broadcast_to(eta_inner(x1, x2), (N, N))
    return np.where((np.abs(x2) > half_width)[..., None, None], rotation_field(outer), reflection_field(inner))
