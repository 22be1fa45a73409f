"""Load paths, the pseudo-time step loop and stress-relaxed macroscopic steps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, logm

from .homogenization import HomogenizedRecord, average_all
from .solver import NewtonSettings, RVEProblem, State, newton_solve

log = logging.getLogger(__name__)

MECHANICAL = "mechanical"
MAGNETIC = "magnetic"
COMBINED = "combined"
STRESS_RELAXED_MAGNETIC = "stress_relaxed_magnetic"
UNIAXIAL_ISOCHORIC_MAGNETIC = "uniaxial_isochoric_magnetic"
KINDS = (MECHANICAL, MAGNETIC, COMBINED, STRESS_RELAXED_MAGNETIC, UNIAXIAL_ISOCHORIC_MAGNETIC)

# symmetric-tensor component order used for relaxation targets and variables
VOIGT = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


class PathFailureError(RuntimeError):
    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


@dataclass
class LoadPath:
    """Linear pseudo-time ramp ``t in [0, 1]`` from the unloaded state.

    ``isochoric_zz`` replaces ``F_zz`` by ``1/(F_xx F_yy)`` at every ``t``.
    Kind ``uniaxial_isochoric_magnetic`` ramps ``F_xx`` and sets
    ``F_yy = F_zz = F_xx**-0.5``.  Kind ``stress_relaxed_magnetic`` ignores
    ``F_final`` and solves for the macroscopic stretch at every step.
    """

    kind: str = COMBINED
    F_final: np.ndarray = field(default_factory=lambda: np.eye(3))
    B_final: np.ndarray = field(default_factory=lambda: np.zeros(3))
    steps: int = 10
    isochoric_zz: bool = False
    relaxed: tuple = VOIGT
    stress_tol: float = 1e-3

    def __post_init__(self):
        self.F_final = np.asarray(self.F_final, dtype=float).reshape(3, 3)
        self.B_final = np.asarray(self.B_final, dtype=float).reshape(3)
        self.relaxed = tuple(tuple(int(i) for i in c) for c in self.relaxed)
        if self.kind not in KINDS:
            raise ValueError(f"unknown load kind {self.kind!r}; expected one of {KINDS}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.kind == STRESS_RELAXED_MAGNETIC and not self.stress_tol > 0:
            raise ValueError("stress tolerance must be positive")
        if self.kind in (MAGNETIC, STRESS_RELAXED_MAGNETIC):
            self.F_final = np.eye(3)
        if self.kind == MECHANICAL:
            self.B_final = np.zeros(3)

    @classmethod
    def reference_ramp(cls, kind=COMBINED, steps=10):
        """Reference ramps: F = diag(1.1, 0.9, isochoric) and/or B = 0.25 T e_z."""
        return cls(kind, np.diag([1.1, 0.9, 1.0 / 0.99]), [0.0, 0.0, 0.25], steps, isochoric_zz=True)


def loads_at(t, path: LoadPath):
    """Macroscopic ``(F_M, B_M)`` at pseudo-time ``t``."""
    if not -1e-14 <= t <= 1.0 + 1e-14:
        raise ValueError(f"pseudo-time {t} outside [0, 1]")
    B = t * path.B_final
    if path.kind == UNIAXIAL_ISOCHORIC_MAGNETIC:
        s = 1.0 + t * (path.F_final[0, 0] - 1.0)
        return np.diag([s, s**-0.5, s**-0.5]), B
    F = np.eye(3) + t * (path.F_final - np.eye(3))
    if path.isochoric_zz:
        F[2, 2] = 1.0 / (F[0, 0] * F[1, 1])
    return F, B


@dataclass
class StepOutcome:
    state: State
    iterations: int
    cuts: int


def advance(problem: RVEProblem, state: State, t_target, path, settings, max_halvings=4, step=0):
    """Move ``state`` to ``t_target``, halving the increment on Newton failure."""
    t0 = state.t
    dt = t_target - t0
    iters = cuts = 0
    while state.t < t_target - 1e-14:
        t_try = min(state.t + dt, t_target)
        F, B = loads_at(t_try, path)
        res = newton_solve(problem, state, F, B, settings, t=t_try, step=step)
        iters += res.iterations
        if res.converged:
            state = res.state
            continue
        cuts += 1
        if cuts > max_halvings:
            raise RuntimeError(f"step {step}: no convergence after {max_halvings} halvings at t={t_try:.6g} ({res.message})")
        dt *= 0.5
        log.info("step %d: cutting increment to %.4g (%s)", step, dt, res.message)
    return StepOutcome(state, iters, cuts)


def run_path(problem: RVEProblem, path: LoadPath, settings: NewtonSettings | None = None,
             max_halvings=4, on_step=None, relax_options=None):
    """Solve the ramp step by step; one record per converged step.

    ``on_step(k, state, record)`` is called after every step.  On an
    unrecoverable failure :class:`PathFailureError` carries the partial records.
    """
    settings = settings or NewtonSettings()
    state = problem.zero_state()
    records = []
    for k in range(1, path.steps + 1):
        t = k / path.steps
        try:
            if path.kind == STRESS_RELAXED_MAGNETIC:
                _, B = loads_at(t, path)
                out = stress_relaxed_step(problem, B, path.relaxed, path.stress_tol, state=state,
                                          settings=settings, **(relax_options or {}))
                state = out.state
                state.t = t
                rec = out.record
                rec.t = t
            else:
                out = advance(problem, state, t, path, settings, max_halvings, step=k)
                state = out.state
                rec = average_all(problem, state, out.iterations)
        except (RuntimeError, ValueError) as exc:
            raise PathFailureError(f"load step {k} failed: {exc}", records) from exc
        records.append(rec)
        if on_step is not None:
            on_step(k, state, rec)
    return records


# stress relaxation ------------------------------------------------------------

def _sym_from(v):
    S = np.zeros((3, 3))
    for val, (i, j) in zip(v, VOIGT):
        S[i, j] = S[j, i] = val
    return S


def _vars_from(F):
    S = np.real(logm(0.5 * (F + F.T)))
    return np.array([S[i, j] for i, j in VOIGT])


@dataclass
class RelaxationResult:
    F_M: np.ndarray
    record: HomogenizedRecord
    state: State
    converged: bool
    iterations: int
    history: list


def stress_relaxed_step(problem: RVEProblem, B_M, targets=VOIGT, tol=1e-3, state: State | None = None,
                        settings: NewtonSettings | None = None, max_outer=30, fd_step=1e-6,
                        broyden=False, raise_on_failure=True):
    """Find a symmetric ``F_M = expm(S)`` making the selected components of the
    averaged Cauchy stress vanish at fixed ``B_M``.

    Convergence: ``||sigma_sel|| / sigma_ref <= tol`` with ``sigma_ref`` the
    larger of the matrix ``C1`` and the running maximum of ``|sigma_avg|``.
    The unknowns are the components of ``S`` matching ``targets``; the
    others are kept from the starting ``F_M``.  The outer Jacobian is built
    from forward differences of full RVE solves.
    """
    settings = settings or NewtonSettings()
    B_M = np.asarray(B_M, dtype=float)
    targets = tuple(tuple(sorted(c)) for c in targets)
    idx = [VOIGT.index(c) for c in targets]
    state = state.copy() if state is not None else problem.zero_state()
    v = _vars_from(state.F_M)
    c1 = min(p.C1 for p in problem.materials.values() if p.C1 > 0)
    sigma_ref = c1

    def solve(vv, start):
        F = expm(_sym_from(vv))
        res = newton_solve(problem, start, F, B_M, settings, t=start.t)
        if not res.converged:
            for frac in (0.5, 0.25, 0.125, 0.0625):
                # reach the target through an intermediate deformation
                Fi = expm(_sym_from(_vars_from(start.F_M) + frac * (vv - _vars_from(start.F_M))))
                mid = newton_solve(problem, start, Fi, B_M, settings, t=start.t)
                if mid.converged:
                    res = newton_solve(problem, mid.state, F, B_M, settings, t=start.t)
                    if res.converged:
                        break
            else:
                raise RuntimeError(f"RVE solve failed during stress relaxation ({res.message})")
        rec = average_all(problem, res.state, res.iterations)
        sel = np.array([rec.sigma_avg[i, j] for i, j in targets])
        return sel, rec, res.state

    f, rec, state = solve(v, state)
    history = []
    jac = None
    for it in range(max_outer + 1):
        sigma_ref = max(sigma_ref, float(np.abs(rec.sigma_avg).max()))
        err = float(np.linalg.norm(f)) / sigma_ref
        history.append((it, err, expm(_sym_from(v))))
        log.info("relax %d: |sigma_sel|/sigma_ref = %.3e", it, err)
        if err <= tol:
            return RelaxationResult(state.F_M.copy(), rec, state, True, it, history)
        if it == max_outer:
            break
        if jac is None or not broyden:
            jac = np.empty((len(idx), len(idx)))
            for col, j in enumerate(idx):
                vp = v.copy()
                vp[j] += fd_step
                fp, _, _ = solve(vp, state)
                jac[:, col] = (fp - f) / fd_step
        dv = np.linalg.solve(jac, -f)
        alpha = 1.0
        for _ in range(6):
            vn = v.copy()
            vn[idx] += alpha * dv
            try:
                fn, recn, staten = solve(vn, state)
                if np.linalg.norm(fn) < np.linalg.norm(f) or alpha < 0.1:
                    break
            except RuntimeError:
                pass
            alpha *= 0.5
        else:
            break
        if broyden:
            s = alpha * dv
            jac += np.outer(fn - f - jac @ s, s) / (s @ s)
        v, f, rec, state = vn, fn, recn, staten
    msg = f"stress relaxation did not reach {tol:g} in {max_outer} iterations (last {history[-1][1]:.3e})"
    if raise_on_failure:
        raise RuntimeError(msg)
    log.warning(msg)
    return RelaxationResult(state.F_M.copy(), rec, state, False, len(history) - 1, history)
