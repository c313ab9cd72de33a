import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sk2d import global_p1 as gp

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CUBE_ROOTS = np.exp(2j * np.pi * np.arange(3) / 3)


@pytest.fixture(scope="session")
def p1_symmetric():
    """Three cones of angle parameter 0.9 at the cube roots of unity."""
    return gp.p1_family_construct(CUBE_ROOTS, [0.45] * 3)


@pytest.fixture(scope="session")
def p1_four():
    """Four cones (alpha = 0.6) and the same configuration with the fourth point moved by 0.1."""
    pts = np.concatenate([CUBE_ROOTS, [0.0]])
    fam = gp.p1_family_construct(pts, [0.3] * 4)
    return fam, gp.family_perturb(fam, 3, 0.1)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
