import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_F
from mrerve.autodiff import EvaluationError, HyperDual, energy_derivatives, energy_hessian
from mrerve.constitutive import (
    MaterialParams,
    PointKinematics,
    langevin_prime,
    solve_langevin_field,
)

PARTICLE = MaterialParams.particle()
MATRIX = MaterialParams.matrix()


def random_states(rng, n):
    F = np.array([random_F(rng, 0.2) for _ in range(n)])
    B = rng.standard_normal((n, 3))
    B *= rng.uniform(0, 0.25, (n, 1)) / np.linalg.norm(B, axis=1, keepdims=True)
    Jbar = np.linalg.det(F) * rng.uniform(0.98, 1.02, n)
    return F, B, Jbar


def fd_blocks(F, B, Jbar, params, h=1e-6):
    """Central differences of psi (first derivatives) and of the AD gradient
    (second derivatives) in the 12 variables (F, B) with Jbar fixed."""
    x0 = np.concatenate([F.ravel(), B])
    X = np.repeat(x0[None], 24, axis=0)
    for i in range(12):
        X[2 * i, i] += h
        X[2 * i + 1, i] -= h
    val, grad, _ = energy_hessian(X[:, :9], X[:, 9:], np.full(24, Jbar), params)
    g = (val[0::2] - val[1::2]) / (2 * h)
    H = (grad[0::2, :12] - grad[1::2, :12]) / (2 * h)
    return g, H.T


def rel_err(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)


def test_reference_state_stress_free():
    d = energy_derivatives(PointKinematics(np.eye(3), np.zeros(3)), MATRIX)
    assert np.abs(d.P).max() < 1e-9 and np.abs(d.H).max() == 0.0


def test_vacuum_field():
    b = 0.2
    d = energy_derivatives(PointKinematics(np.eye(3), [0, 0, b]), MATRIX)
    assert np.allclose(d.H, [0, 0, b / MATRIX.mu0], rtol=1e-14)
    assert np.allclose(d.E, np.eye(3) / MATRIX.mu0, rtol=1e-12)


@pytest.mark.parametrize("params", [MATRIX, PARTICLE, MaterialParams.neo_hookean(5.6e7, 0.45)],
                         ids=["matrix", "particle", "neo_hookean"])
def test_blocks_match_finite_differences(params):
    rng = np.random.default_rng(7)
    F, B, Jbar = random_states(rng, 10)
    for k in range(10):
        d = energy_derivatives(PointKinematics(F[k], B[k], Jbar[k]), params)
        g, H = fd_blocks(F[k], B[k], Jbar[k], params)
        assert rel_err(d.P.ravel(), g[:9]) <= 1e-5
        assert rel_err(d.H, g[9:]) <= 1e-5
        assert rel_err(d.A.reshape(9, 9), H[:9, :9]) <= 1e-5
        assert rel_err(d.C.reshape(9, 3), H[:9, 9:]) <= 1e-5
        assert rel_err(d.D.reshape(3, 9), H[9:, :9]) <= 1e-5
        assert rel_err(d.E, H[9:, 9:]) <= 1e-5


def test_mixed_blocks_are_transposes():
    rng = np.random.default_rng(1)
    F, B, Jbar = random_states(rng, 5)
    d = energy_derivatives(PointKinematics(F, B, Jbar), PARTICLE)
    assert np.array_equal(d.D, np.transpose(d.C, (0, 3, 1, 2)))


def test_hessian_symmetric_on_random_states():
    rng = np.random.default_rng(3)
    F, B, Jbar = random_states(rng, 50)
    for params in (MATRIX, PARTICLE):
        _, _, hess = energy_hessian(F, B, Jbar, params)
        asym = np.abs(hess - np.swapaxes(hess, 1, 2)).max(axis=(1, 2))
        assert np.all(asym <= 1e-12 * np.abs(hess).max(axis=(1, 2)))


def test_volumetric_seed_derivatives():
    F = np.diag([1.05, 0.97, 1.0])
    Jbar = 1.01
    _, g, h = energy_hessian(F, np.zeros(3), Jbar, MATRIX)
    assert g[0, 12] == pytest.approx(MATRIX.K * (Jbar - 1), rel=1e-12)
    assert h[0, 12, 12] == pytest.approx(MATRIX.K, rel=1e-12)
    assert np.abs(h[0, :12, 12]).max() == 0.0


@given(st.floats(0.8, 1.25), st.floats(0.8, 1.25), st.floats(0.8, 1.25))
def test_isochoric_stress_on_diagonal_F(a, b, c):
    # P_11 = psi'(d) d(J^{-2/3} I1)/dF_11 with Jbar held fixed
    F = np.diag([a, b, c])
    d = energy_derivatives(PointKinematics(F, np.zeros(3), 1.0), MATRIX)
    J = a * b * c
    I1 = a * a + b * b + c * c
    dev = J ** (-2 / 3) * I1 - 3
    dpsi = MATRIX.C1 + 2 * MATRIX.C2 * dev + 3 * MATRIX.C3 * dev**2
    for i, s in enumerate((a, b, c)):
        hand = dpsi * J ** (-2 / 3) * (2 * s - 2 * I1 / (3 * s))
        assert d.P[i, i] == pytest.approx(hand, rel=1e-10, abs=1e-7)
    assert np.abs(d.P - np.diag(np.diag(d.P))).max() < 1e-8


@pytest.mark.parametrize("b", [1e-3, 0.05, 0.25, 1.0, 3.0])
def test_langevin_implicit_derivative(b):
    p = PARTICLE
    d = energy_derivatives(PointKinematics(np.eye(3), [0, 0, b]), p)
    h = solve_langevin_field(np.array([b]), p)[0]
    dh = 1.0 / (p.mu0 * (1 + p.ms_leg * p.alpha_leg * langevin_prime(np.array([p.alpha_leg * h]))[0]))
    assert d.E[2, 2] - 1 / p.mu0 == pytest.approx(dh, rel=1e-8)
    assert d.H[2] == pytest.approx(b / p.mu0 + h, rel=1e-12)


def test_hyperdual_arithmetic():
    x, y = HyperDual.seeds(np.array([[2.0, 3.0]]))
    f = x * x * y + y / x
    assert f.val[0] == pytest.approx(12 + 1.5)
    assert np.allclose(f.grad[0], [2 * 2 * 3 - 3 / 4, 4 + 0.5])
    assert np.allclose(f.full_hess()[0], [[2 * 3 + 2 * 3 / 8, 2 * 2 - 1 / 4], [2 * 2 - 1 / 4, 0.0]])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_derivative_rejected():
    with pytest.raises((EvaluationError, ValueError)):
        energy_hessian(np.diag([1.0, 1.0, 0.0]), np.zeros(3), 1.0, MATRIX)
