import numpy as np
import pytest

from mrerve.autodiff import energy_hessian
from mrerve.constitutive import MaterialParams
from mrerve.homogenization import average_all, effective_magnetostriction, hill_mandel_check
from mrerve.mesh import build_rve_mesh
from mrerve.solver import RVEProblem, newton_solve

F_M = np.array([[1.05, 0.02, 0.0], [0.0, 0.96, 0.01], [0.01, 0.0, 1.0 / (1.05 * 0.96)]])
B_M = np.array([0.0, 0.05, 0.25])


@pytest.fixture(scope="module")
def homogeneous_solution():
    problem = RVEProblem(build_rve_mesh(3))
    res = newton_solve(problem, problem.zero_state(), F_M, B_M)
    assert res.converged
    return problem, res.state


@pytest.fixture(scope="module")
def inclusion_solution(inclusion3):
    res = newton_solve(inclusion3, inclusion3.zero_state(), F_M, B_M)
    assert res.converged
    return inclusion3, res.state


def test_zero_state_averages(inclusion3):
    rec = average_all(inclusion3, inclusion3.zero_state())
    assert np.abs(rec.P_avg).max() <= 1e-9 and np.abs(rec.H_avg).max() == 0.0
    assert rec.psi_avg == 0.0 and rec.J_avg == pytest.approx(1.0, abs=1e-15)
    assert rec.J_particle_avg == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("which", ["homogeneous_solution", "inclusion_solution"])
def test_kinematic_averages_exact(which, request):
    problem, state = request.getfixturevalue(which)
    rec = average_all(problem, state)
    assert np.abs(rec.F_avg - F_M).max() <= 1e-12
    assert np.abs(rec.B_avg - B_M).max() <= 1e-12
    assert np.abs(rec.sigma_avg - rec.sigma_avg.T).max() <= 1e-8 * np.abs(rec.sigma_avg).max()


def test_homogeneous_stress_equals_pointwise_response(homogeneous_solution):
    problem, state = homogeneous_solution
    rec = average_all(problem, state)
    p = MaterialParams.matrix()
    J = np.linalg.det(F_M)
    val, g, _ = energy_hessian(F_M, B_M, J, p)
    P = g[0, :9].reshape(3, 3) + g[0, 12] * J * np.linalg.inv(F_M).T
    assert np.abs(rec.P_avg - P).max() <= 1e-10 * np.abs(P).max()
    assert np.allclose(rec.H_avg, g[0, 9:12], rtol=1e-10)
    assert rec.psi_avg == pytest.approx(val[0], rel=1e-10)
    assert np.allclose(rec.sigma_avg, P @ F_M.T / J, rtol=1e-10, atol=1e-10 * np.abs(P).max())


def test_hill_mandel_homogeneous(homogeneous_solution):
    problem, state = homogeneous_solution
    rng = np.random.default_rng(0)
    assert hill_mandel_check(problem, state, 1e-2 * rng.standard_normal((3, 3)), 1e-2 * rng.standard_normal(3)) <= 1e-10


def test_hill_mandel_inclusion(inclusion_solution):
    problem, state = inclusion_solution
    rng = np.random.default_rng(1)
    assert hill_mandel_check(problem, state, np.diag([1e-2, -1e-2, 0.0]), np.zeros(3)) <= 1e-8
    for _ in range(5):
        gap = hill_mandel_check(problem, state, 1e-2 * rng.standard_normal((3, 3)), 1e-2 * rng.standard_normal(3))
        assert gap <= 1e-8


def test_magnetostriction_examples():
    assert np.all(effective_magnetostriction(np.eye(3)) == 0)
    F = np.diag([1.01, 1.01, 0.98])
    assert np.allclose(effective_magnetostriction(F), [0.01, 0.01, -0.02])
    assert effective_magnetostriction(F, [0, 0, 1]) == pytest.approx(-0.02)
    N = np.ones(3) / np.sqrt(3)
    assert effective_magnetostriction(F, N) == pytest.approx(np.linalg.norm(F @ N) - 1, rel=1e-14)
    assert effective_magnetostriction(F, [2, 2, 2]) == pytest.approx(np.sqrt((2 * 1.01**2 + 0.98**2) / 3) - 1)
