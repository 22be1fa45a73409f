import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mrerve.mesh import Inclusion, build_rve_mesh
from mrerve.solver import RVEProblem

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def homogeneous2():
    return RVEProblem(build_rve_mesh(2))


@pytest.fixture(scope="session")
def inclusion2():
    return RVEProblem(build_rve_mesh(2, inclusions=[Inclusion((0.25, 0.25, 0.25), 0.3)]))


@pytest.fixture(scope="session")
def inclusion3():
    return RVEProblem(build_rve_mesh(3, inclusions=[Inclusion((0.5, 0.5, 0.5), 0.3)]))


def random_F(rng, scale=0.2):
    """Random deformation gradient with ||F - I|| <= scale and det > 0."""
    G = rng.uniform(-1, 1, (3, 3))
    return np.eye(3) + scale * G / np.linalg.norm(G)


def random_rotation(rng):
    Q, R = np.linalg.qr(rng.standard_normal((3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    return Q


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        status, title, elapsed, detail = results[number]
        terminalreporter.write_line(f"{status}  {number}. {title} [{elapsed:.1f} s] {detail}")
