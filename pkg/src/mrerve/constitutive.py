"""Pointwise free energy of the magneto-active elastomer phases.

The total energy density (per reference volume) is the sum of

* a Yeoh potential on the J-bar modified kinematics (or a compressible
  Neo-Hookean potential on pointwise kinematics),
* the free-space field energy ``|F B|^2 / (2 mu0 J)``,
* for magnetizable phases, ``J * w_mag(b)`` with the Langevin saturation
  law and ``b = |F B| / J``.

All energy routines are written so that the kinematic arguments may be plain
floats / numpy arrays or :class:`mrerve.autodiff.HyperDual` numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

MU0_REF = 1.2564e-6

YEOH = "Yeoh"
NEO_HOOKEAN = "NeoHookeanCompressible"


class InvalidKinematicsError(ValueError):
    """Raised for non-positive Jacobians."""


class SolverFailureError(RuntimeError):
    """Raised when the Langevin inversion does not converge."""


@dataclass(frozen=True)
class MaterialParams:
    """Constitutive constants of one phase (SI units)."""

    K: float = 1.25e6
    C1: float = 1.2595e4
    C2: float = 70.244
    C3: float = 9.8177
    mu0: float = MU0_REF
    ms_leg: float = 8.41e5
    alpha_leg: float = 2.18e-5
    eta: int = 0
    model: str = YEOH
    mu_nh: float = 0.0
    kappa_nh: float = 0.0

    def __post_init__(self):
        errors = []
        if self.model not in (YEOH, NEO_HOOKEAN):
            errors.append(f"unknown model {self.model!r}")
        if self.model == YEOH:
            if not self.K > 0:
                errors.append("K must be > 0")
            if not self.C1 > 0:
                errors.append("C1 must be > 0")
        else:
            if not self.mu_nh > 0:
                errors.append("mu_nh must be > 0")
            if not self.kappa_nh > 0:
                errors.append("kappa_nh must be > 0")
        if not self.mu0 > 0:
            errors.append("mu0 must be > 0")
        if not self.ms_leg >= 0:
            errors.append("ms_leg must be >= 0")
        if not self.alpha_leg > 0:
            errors.append("alpha_leg must be > 0")
        if self.eta not in (0, 1):
            errors.append("eta must be 0 or 1")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def chi_L(self) -> float:
        return self.ms_leg * self.alpha_leg / 3.0

    @property
    def mu_eff(self) -> float:
        return self.mu0 * (1.0 + self.chi_L)

    @classmethod
    def matrix(cls) -> "MaterialParams":
        """Elastomer matrix of the reference parameter set (not magnetizable)."""
        return cls()

    @classmethod
    def particle(cls) -> "MaterialParams":
        """Carbonyl-iron particle phase of the reference parameter set."""
        return cls(K=2.5e8, C1=1.0e7, C2=0.0, C3=0.0, eta=1)

    @classmethod
    def neo_hookean(cls, E: float, nu: float, **magnetic) -> "MaterialParams":
        """Compressible Neo-Hookean phase from Young's modulus and Poisson ratio."""
        mu = E / (2.0 * (1.0 + nu))
        kappa = E / (3.0 * (1.0 - 2.0 * nu))
        magnetic.setdefault("eta", 1)
        return cls(model=NEO_HOOKEAN, mu_nh=mu, kappa_nh=kappa, C2=0.0, C3=0.0, **magnetic)

    def with_(self, **changes) -> "MaterialParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class PointKinematics:
    F: np.ndarray
    B: np.ndarray
    Jbar_e: float = 1.0

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "B", np.asarray(self.B, dtype=float))
        if np.any(np.linalg.det(F) <= 0) or np.any(np.asarray(self.Jbar_e) <= 0):
            raise InvalidKinematicsError("det(F) and Jbar_e must be positive")


def jbar_split(F, Jbar_e):
    """Rescale ``F`` so that its determinant equals the cell-averaged Jacobian.

    Returns ``(Fbar, I1bar)`` with ``Fbar = (Jbar_e / det F)**(1/3) F``.
    """
    F = np.asarray(F, dtype=float)
    J = np.linalg.det(F)
    if np.any(J <= 0) or np.any(np.asarray(Jbar_e) <= 0):
        raise InvalidKinematicsError(f"det(F)={J}, Jbar_e={Jbar_e}")
    s = np.cbrt(np.asarray(Jbar_e) / J)
    Fbar = s[..., None, None] * F if np.ndim(s) else s * F
    I1bar = np.einsum("...ij,...ij->...", Fbar, Fbar)
    return Fbar, I1bar


# Langevin function and its relatives ---------------------------------------

_SMALL = 1e-2
_LARGE = 20.0


def langevin(x):
    """L(x) = coth(x) - 1/x, odd, with a Taylor branch near zero."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    small = ax < _SMALL
    xs = np.where(small, 1.0, x)
    direct = 1.0 / np.tanh(xs) - 1.0 / xs
    x2 = x * x
    series = x * (1.0 / 3.0 - x2 / 45.0 + 2.0 * x2 * x2 / 945.0 - x2**3 / 4725.0)
    return np.where(small, series, direct)


def langevin_prime(x):
    """dL/dx = 1/x^2 - 1/sinh(x)^2."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    small = ax < _SMALL
    xs = np.where(small, 1.0, np.minimum(ax, 350.0))
    direct = 1.0 / xs**2 - 1.0 / np.sinh(xs) ** 2
    x2 = x * x
    series = 1.0 / 3.0 - x2 / 15.0 + 2.0 * x2 * x2 / 189.0 - 2.0 * x2**3 / 675.0
    return np.where(small, series, direct)


def log_sinhc(x):
    """log(sinh(x)/x) for x >= 0, stable at both ends."""
    x = np.abs(np.asarray(x, dtype=float))
    small = x < _SMALL
    large = x > _LARGE
    xm = np.where(small | large, 1.0, x)
    mid = np.log(np.sinh(xm) / xm)
    x2 = x * x
    series = x2 / 6.0 - x2 * x2 / 180.0 + x2**3 / 2835.0
    xl = np.where(large, x, 1.0)
    asym = xl - np.log(2.0 * xl)
    return np.where(small, series, np.where(large, asym, mid))


def solve_langevin_field(b, params: MaterialParams, rtol=1e-12, atol=1e-14, max_iter=100):
    """Field magnitude h (A/m) with ``mu0 (h + ms L(alpha h)) = b``.

    Vectorized safeguarded Newton iteration; the root is bracketed in
    ``[0, b/mu0]`` and any Newton step leaving the bracket is replaced by
    bisection.
    """
    b = np.asarray(b, dtype=float)
    if np.any(b < 0):
        raise ValueError("b must be non-negative")
    mu0, ms, al = params.mu0, params.ms_leg, params.alpha_leg
    lo = np.zeros_like(b)
    hi = b / mu0
    h = np.minimum(b / params.mu_eff, hi)
    tol = rtol * b + atol
    done = np.zeros(b.shape, dtype=bool)
    for _ in range(max_iter):
        r = mu0 * (h + ms * langevin(al * h)) - b
        done = np.abs(r) <= tol
        if np.all(done):
            return h
        lo = np.where(r < 0, h, lo)
        hi = np.where(r > 0, h, hi)
        dr = mu0 * (1.0 + ms * al * langevin_prime(al * h))
        step = h - r / dr
        bad = (step <= lo) | (step >= hi) | ~np.isfinite(step)
        h = np.where(done, h, np.where(bad, 0.5 * (lo + hi), step))
    r = mu0 * (h + ms * langevin(al * h)) - b
    if np.all(np.abs(r) <= tol):
        return h
    raise SolverFailureError(f"Langevin inversion did not converge (max |res| = {np.max(np.abs(r)):.3e})")


def _wmag_of_q(q, params: MaterialParams):
    """w_mag as a function of q = b^2 with its first two q-derivatives.

    Uses ``dw/db = h`` and the implicit derivative ``dh/db`` at the
    converged field, with a low-field series where the closed forms cancel.
    """
    q = np.maximum(np.asarray(q, dtype=float), 0.0)
    mu0, ms, al = params.mu0, params.ms_leg, params.alpha_leg
    mue = params.mu_eff
    k = mu0 * ms * al**3 / 45.0
    m = 2.0 * mu0 * ms * al**5 / 945.0
    c3 = k / mue**4
    c5 = 3.0 * k * k / mue**7 - m / mue**6
    b = np.sqrt(q)
    small = al * b / mue < _SMALL
    bs = np.where(small, 1.0, b)
    h = solve_langevin_field(bs, params)
    x = al * h
    w = bs * h - 0.5 * mu0 * h * h - (mu0 * ms / al) * log_sinhc(x)
    dh = 1.0 / (mu0 * (1.0 + ms * al * langevin_prime(x)))
    g1 = h / (2.0 * bs)
    g2 = (dh - h / bs) / (4.0 * bs * bs)
    w_s = q / (2.0 * mue) + c3 * q * q / 4.0 + c5 * q**3 / 6.0
    g1_s = 1.0 / (2.0 * mue) + c3 * q / 2.0 + c5 * q * q / 2.0
    g2_s = c3 / 2.0 + c5 * q
    return (np.where(small, w_s, w), np.where(small, g1_s, g1), np.where(small, g2_s, g2))


def magnetization_energy(b, params: MaterialParams):
    """Magnetization energy per current volume, ``b h - mu0 h^2/2 - W*(h)``."""
    b = np.asarray(b, dtype=float)
    if np.any(b < 0):
        raise ValueError("b must be non-negative")
    return _wmag_of_q(b * b, params)[0]


# Energy on generic scalars ---------------------------------------------------

def _apply(x, fn):
    """Evaluate a scalar function on a float array or a hyper-dual number.

    ``fn(v)`` returns the value and the first two derivatives at ``v``.
    """
    if hasattr(x, "apply"):
        return x.apply(*fn(x.val))
    return fn(np.asarray(x, dtype=float))[0]


def _power(x, p):
    return _apply(x, lambda v: (v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2)))


def _log(x):
    return _apply(x, lambda v: (np.log(v), 1.0 / v, -1.0 / (v * v)))


def _det3(F):
    return (F[0][0] * (F[1][1] * F[2][2] - F[1][2] * F[2][1])
            - F[0][1] * (F[1][0] * F[2][2] - F[1][2] * F[2][0])
            + F[0][2] * (F[1][0] * F[2][1] - F[1][1] * F[2][0]))


def mechanical_energy(F, J, Jbar, params: MaterialParams):
    """Mechanical part. ``F`` is a 3x3 nested list of scalars."""
    I1 = sum(F[i][j] * F[i][j] for i in range(3) for j in range(3))
    if params.model == NEO_HOOKEAN:
        I1bar = I1 * _power(J, -2.0 / 3.0)
        lnJ = _log(J)
        return 0.5 * params.mu_nh * (I1bar - 3.0) + 0.5 * params.kappa_nh * lnJ * lnJ
    # distortional invariant of Fbar: det(Fbar)^(-2/3) tr(Fbar^T Fbar) = J^(-2/3) I1,
    # so Jbar enters through the volumetric term only and F = I is stress free
    I1bar = I1 * _power(J, -2.0 / 3.0)
    d = I1bar - 3.0
    psi = 0.5 * params.K * (Jbar - 1.0) * (Jbar - 1.0) + params.C1 * d
    if params.C2 != 0.0 or params.C3 != 0.0:
        psi = psi + (params.C2 + params.C3 * d) * d * d
    return psi


def energy_scalars(F, B, Jbar, params: MaterialParams):
    """Total energy from nested-list kinematics (floats, arrays or duals)."""
    J = _det3(F)
    FB = [F[i][0] * B[0] + F[i][1] * B[1] + F[i][2] * B[2] for i in range(3)]
    s2 = FB[0] * FB[0] + FB[1] * FB[1] + FB[2] * FB[2]
    invJ = _power(J, -1.0)
    psi = mechanical_energy(F, J, Jbar, params) + (0.5 / params.mu0) * s2 * invJ
    if params.eta:
        q = s2 * invJ * invJ
        psi = psi + J * _apply(q, lambda v: _wmag_of_q(v, params))
    return psi


def total_energy(pk: PointKinematics, params: MaterialParams):
    """Energy density per reference volume at one (or a batch of) point(s)."""
    F = np.asarray(pk.F, dtype=float)
    B = np.asarray(pk.B, dtype=float)
    J = np.linalg.det(F)
    if np.any(J <= 0) or np.any(np.asarray(pk.Jbar_e) <= 0):
        raise InvalidKinematicsError("non-positive Jacobian")
    Fl = [[F[..., i, j] for j in range(3)] for i in range(3)]
    Bl = [B[..., i] for i in range(3)]
    return energy_scalars(Fl, Bl, np.asarray(pk.Jbar_e, dtype=float), params)
