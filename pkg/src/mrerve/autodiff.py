"""Second-order forward-mode automatic differentiation.

:class:`HyperDual` carries a value, a gradient and a dense Hessian with
respect to ``n`` seed variables, vectorized over a leading batch axis so a
whole mesh worth of quadrature points is differentiated in one pass.  The
seeds used by :func:`energy_derivatives` are the nine components of ``F``
(row-major), the three components of ``B`` and, as a thirteenth variable,
the cell-averaged Jacobian ``Jbar_e``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .constitutive import MaterialParams, PointKinematics, energy_scalars


class EvaluationError(FloatingPointError):
    """Non-finite energy derivatives."""


class HyperDual:
    """Batch of scalars with gradient and Hessian.

    ``val`` has shape ``(N,)``, ``grad`` ``(N, n)`` and ``hess`` ``(N, n, n)``;
    ``hess`` may be ``None`` for quantities that are affine in the seeds.
    """

    __slots__ = ("val", "grad", "hess")
    __array_priority__ = 100

    def __init__(self, val, grad, hess=None):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def seeds(cls, values):
        """Independent variables from an ``(N, n)`` array of values."""
        values = np.asarray(values, dtype=float)
        N, n = values.shape
        eye = np.eye(n)
        return [cls(values[:, i].copy(), np.broadcast_to(eye[i], (N, n))) for i in range(n)]

    @property
    def n(self):
        return self.grad.shape[-1]

    def apply(self, f, f1, f2):
        """Chain rule for a scalar function with value f and derivatives f1, f2."""
        g = self.grad
        grad = f1[:, None] * g
        hess = f2[:, None, None] * (g[:, :, None] * g[:, None, :])
        if self.hess is not None:
            hess = hess + f1[:, None, None] * self.hess
        return HyperDual(f, grad, hess)

    # arithmetic ------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(self.val + other.val, self.grad + other.grad, _hadd(self.hess, other.hess))
        return HyperDual(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self):
        return HyperDual(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, HyperDual):
            a, b = self, other
            grad = a.val[:, None] * b.grad + b.val[:, None] * a.grad
            outer = a.grad[:, :, None] * b.grad[:, None, :]
            hess = outer + np.swapaxes(outer, 1, 2)
            if a.hess is not None:
                hess = hess + b.val[:, None, None] * a.hess
            if b.hess is not None:
                hess = hess + a.val[:, None, None] * b.hess
            return HyperDual(a.val * b.val, grad, hess)
        other = np.asarray(other, dtype=float)
        if other.ndim == 0:
            return HyperDual(self.val * other, self.grad * other, None if self.hess is None else self.hess * other)
        return HyperDual(self.val * other, self.grad * other[:, None],
                         None if self.hess is None else self.hess * other[:, None, None])

    __rmul__ = __mul__

    def reciprocal(self):
        v = self.val
        return self.apply(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __truediv__(self, other):
        if isinstance(other, HyperDual):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        v = self.val
        return self.apply(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    def full_hess(self):
        if self.hess is None:
            return np.zeros(self.grad.shape + (self.n,))
        return self.hess


def _hadd(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


class EnergyDerivatives(NamedTuple):
    psi: np.ndarray
    P: np.ndarray
    H: np.ndarray
    A: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray


def energy_hessian(F, B, Jbar, params: MaterialParams):
    """Value, gradient and Hessian of psi in the 13 variables (F, B, Jbar).

    ``F`` is ``(N, 3, 3)``, ``B`` ``(N, 3)``, ``Jbar`` ``(N,)``.
    """
    F = np.asarray(F, dtype=float).reshape(-1, 3, 3)
    B = np.asarray(B, dtype=float).reshape(-1, 3)
    N = F.shape[0]
    Jbar = np.broadcast_to(np.asarray(Jbar, dtype=float), (N,))
    x = np.concatenate([F.reshape(N, 9), B, Jbar[:, None]], axis=1)
    s = HyperDual.seeds(x)
    Fl = [[s[3 * i + j] for j in range(3)] for i in range(3)]
    psi = energy_scalars(Fl, s[9:12], s[12], params)
    hess = psi.full_hess()
    if not (np.all(np.isfinite(psi.grad)) and np.all(np.isfinite(hess))):
        raise EvaluationError("non-finite energy derivative")
    return psi.val, np.ascontiguousarray(psi.grad), hess


def energy_derivatives(pk: PointKinematics, params: MaterialParams) -> EnergyDerivatives:
    """Stress, field and the four tangent blocks with ``Jbar_e`` held fixed.

    Works on a single point or on a batch (leading axes of ``pk.F``).
    """
    F = np.asarray(pk.F, dtype=float)
    batch = F.shape[:-2]
    val, g, h = energy_hessian(F, pk.B, np.broadcast_to(pk.Jbar_e, batch), params)
    N = val.shape[0]
    P = g[:, :9].reshape(N, 3, 3)
    H = g[:, 9:12]
    A = h[:, :9, :9].reshape(N, 3, 3, 3, 3)
    C = h[:, :9, 9:12].reshape(N, 3, 3, 3)
    E = h[:, 9:12, 9:12]
    D = np.transpose(C, (0, 3, 1, 2)).copy()
    out = EnergyDerivatives(val, P, H, A, C, D, E)
    return EnergyDerivatives(*(a.reshape(batch + a.shape[1:]) for a in out))
