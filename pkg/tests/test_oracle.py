import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mrerve.constitutive import MaterialParams
from mrerve.oracle import (
    coefficient_table,
    coefficients,
    gamma_tensor,
    isotropic_compliance,
    predicted_strain,
    rve_scale_coefficients,
)


@pytest.fixture(scope="module")
def coeffs():
    return coefficients(MaterialParams.particle())


def test_published_coefficients(coeffs):
    L = coeffs.Lambda
    assert coeffs.chi_L == pytest.approx(6.11, abs=0.01)
    assert coeffs.mu_eff == pytest.approx(8.93e-6, abs=1e-8)
    assert L[2, 2, 2, 2] == pytest.approx(-1.51e-2, rel=5e-3)
    assert L[0, 0, 2, 2] == pytest.approx(7.56e-3, rel=5e-3)
    assert L[1, 1, 2, 2] == L[0, 0, 2, 2]
    assert coeffs.E_lin == 6e7


def test_trace_free_and_ratio(coeffs):
    L = coeffs.Lambda
    assert abs(L[2, 2, 2, 2] + L[0, 0, 2, 2] + L[1, 1, 2, 2]) <= 1e-16
    assert L[2, 2, 2, 2] / L[0, 0, 2, 2] == pytest.approx(-2.0, rel=1e-14)


def test_minor_symmetries(coeffs):
    G = coeffs.Gamma
    assert np.array_equal(G, np.swapaxes(G, 0, 1)) and np.array_equal(G, np.swapaxes(G, 2, 3))
    assert coeffs.coupling == pytest.approx(1 / MaterialParams.particle().mu0 + 1 / coeffs.mu_eff, rel=1e-14)


def test_vacuum_only_coupling():
    p = MaterialParams.particle()
    c = coefficients(p, eta=0)
    assert c.Lambda[2, 2, 2, 2] == pytest.approx(-1 / (6 * p.C1 * p.mu0), rel=1e-14)


def test_compliance_inverts_isotropic_stiffness():
    E, nu = 2.0e6, 0.3
    lam, mu = E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu))
    I = np.eye(3)
    C = lam * np.einsum("ij,kl->ijkl", I, I) + mu * (np.einsum("ik,jl->ijkl", I, I) + np.einsum("il,jk->ijkl", I, I))
    eps = np.array([[0.01, 0.002, 0], [0.002, -0.004, 0.001], [0, 0.001, 0.003]])
    assert np.allclose(np.einsum("ijkl,kl->ij", isotropic_compliance(E, nu), np.einsum("ijkl,kl->ij", C, eps)), eps)


def test_predicted_strain_examples(coeffs):
    assert np.all(predicted_strain(coeffs, np.zeros(3)) == 0)
    eps = predicted_strain(coeffs, [0, 0, 0.045])
    assert eps[2, 2] == pytest.approx(-1.51e-2 * 0.045**2, rel=5e-3)
    assert np.allclose(eps, np.diag(np.diag(eps)))
    assert np.allclose(np.diag(eps), [coeffs.Lambda[0, 0, 2, 2], coeffs.Lambda[1, 1, 2, 2], coeffs.Lambda[2, 2, 2, 2]]
                       * np.array(0.045**2))


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_predicted_strain_trace_free(bx, by, bz):
    eps = predicted_strain(coefficients(), [bx, by, bz])
    assert abs(np.trace(eps)) <= 1e-15 * max(1.0, np.abs(eps).max())
    assert np.allclose(eps, eps.T)


def test_gamma_is_isotropic():
    G = gamma_tensor(2.0)
    R = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))[0]
    rotated = np.einsum("ia,jb,mc,nd,abcd->ijmn", R, R, R, R, G)
    assert np.allclose(rotated, G, atol=1e-14)


def test_rve_scale_coefficients():
    assert np.all(rve_scale_coefficients(np.eye(3), [0, 0, 0.045]) == 0)
    row = np.array([7.8706, 7.8706, -15.3723])
    F = np.eye(3) + np.diag(row * 0.045**2)
    assert np.allclose(rve_scale_coefficients(F, [0, 0, 0.045]), row, rtol=1e-12)
    with pytest.raises(ValueError):
        rve_scale_coefficients(F, np.zeros(3))


@pytest.mark.parametrize("nu", [0.2, 0.4, 0.49])
def test_neo_hookean_phase_uses_poisson_ratio(nu):
    c = coefficients(MaterialParams.neo_hookean(5.6e7, nu))
    L = c.Lambda
    assert c.E_lin == pytest.approx(5.6e7, rel=1e-12)
    # uniaxial field: transverse strain c B^2/(2E), axial -(1 + 2 nu) times that
    assert L[0, 0, 2, 2] == pytest.approx(c.coupling / (2 * 5.6e7), rel=1e-12)
    assert L[2, 2, 2, 2] / L[0, 0, 2, 2] == pytest.approx(-(1 + 2 * nu), rel=1e-12)


def test_table_lines(coeffs):
    lines = coefficient_table(coeffs)
    assert any(line.startswith("Lambda_3333") and "-0.0151" in line for line in lines)
