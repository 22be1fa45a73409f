"""Command line front end: ``run``, ``oracle`` and ``check``.

::

    mrerve run demos/sphere_combined.ini --steps 5 --output out.csv --vtk
    mrerve oracle demos/sphere_combined.ini
    mrerve check
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from dataclasses import replace
from importlib import metadata

import numpy as np

from . import __version__
from .config import ConfigError, OutputConfig, RunConfig, load_config, serialize_config
from .driver import PathFailureError, run_path
from .mesh import build_rve_mesh, write_vtk
from .oracle import coefficient_table, coefficients
from .solver import RVEProblem

SCHEMA_TAG = "mrerve-homogenized/1"
_AXES = "xyz"
_T2 = [a + b for a in _AXES for b in _AXES]
CSV_COLUMNS = (["t"] + [f"F_avg_{c}" for c in _T2] + [f"B_avg_{a}" for a in _AXES]
               + [f"P_avg_{c}" for c in _T2] + [f"H_avg_{a}" for a in _AXES]
               + [f"sigma_avg_{c}" for c in _T2] + ["J_avg", "psi_avg", "newton_iters"])


def code_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return __version__


def config_hash(cfg: RunConfig):
    """Hash of everything that determines the results; output settings are excluded."""
    return hashlib.sha256(serialize_config(replace(cfg, output=OutputConfig())).encode()).hexdigest()[:16]


def csv_header(cfg: RunConfig):
    return [f"# schema: {SCHEMA_TAG}", f"# config_sha256: {config_hash(cfg)}",
            f"# code_version: {code_version()}", ",".join(CSV_COLUMNS)]


def format_row(record):
    vals = record.row()
    return ",".join(str(int(v)) if i == len(vals) - 1 else f"{float(v):.17g}" for i, v in enumerate(vals))


def build_problem(cfg: RunConfig) -> RVEProblem:
    mesh = build_rve_mesh(cfg.mesh.n, cfg.mesh.L, cfg.mesh.inclusions)
    return RVEProblem(mesh, cfg.materials(), gauge=cfg.mesh.gauge)


def cell_fields(problem: RVEProblem, state):
    """Cell-averaged pointwise sigma_zz and |A| for visualization."""
    pd = problem.evaluate(state.x, state.B_M, order=1)
    sigma = np.einsum("cqij,cqkj->cqik", pd.P, pd.F) / pd.J[..., None, None]
    w = problem.ops.dV / problem.ops.cell_volume[:, None]
    szz = np.einsum("cq,cq->c", w, sigma[..., 2, 2])
    a_loc = state.x[problem.ops.dofmap.a_dofs]
    A = np.einsum("cq,cqei,ce->ci", w, problem.ops.ned_vals, a_loc)
    return {"sigma_zz": szz, "A_norm": np.linalg.norm(A, axis=1)}


def vtk_path(csv_path, step):
    stem = os.path.splitext(csv_path)[0]
    return f"{stem}_step{step:04d}.vtk"


def run(cfg: RunConfig, log_stream=None) -> int:
    """Execute a configured load path; writes the CSV (and VTK files)."""
    out = cfg.output
    problem = build_problem(cfg)
    if out.dump_constraints:
        F_end = cfg.load.F_final
        with open(out.dump_constraints, "w") as fh:
            fh.write(problem.constraint_set(F_end).dump() + "\n")
    directory = os.path.dirname(out.csv)
    if directory:
        os.makedirs(directory, exist_ok=True)
    lines = csv_header(cfg)

    def on_step(k, state, rec):
        lines.append(format_row(rec))
        if out.vtk and (k % out.vtk_stride == 0 or k == cfg.load.steps):
            write_vtk(vtk_path(out.csv, k), problem.mesh, point_data={"u": state.u},
                      cell_data=cell_fields(problem, state))
        if out.verbose:
            print(f"step {k}/{cfg.load.steps} t={rec.t:.4f} newton={rec.newton_iters} "
                  f"sigma_zz={rec.sigma_avg[2, 2]:.6g} H_z={rec.H_avg[2]:.6g}", file=log_stream or sys.stdout)

    relax = dict(max_outer=cfg.solver.max_outer, fd_step=cfg.solver.fd_step, broyden=cfg.solver.broyden)
    status = 0
    try:
        run_path(problem, cfg.load, cfg.solver.newton, cfg.solver.max_halvings, on_step, relax)
    except PathFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = 2
    with open(out.csv, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return status


def run_check(stream=None) -> int:
    """Built-in invariant checks on a 2x2x2 RVE with one particle cell."""
    from .homogenization import average_all, hill_mandel_check
    from .mesh import Inclusion
    from .solver import newton_solve

    stream = stream or sys.stdout
    rng = np.random.default_rng(0)
    mesh = build_rve_mesh(2, inclusions=[Inclusion((0.25, 0.25, 0.25), 0.3)])
    p = RVEProblem(mesh)
    results = []
    R, _, _ = p.assemble(p.zero_state().x, np.zeros(3), need_tangent=False)
    results.append(("reference state is in equilibrium", np.abs(R).max() <= 1e-9))
    F = np.diag([1.02, 0.99, 1 / (1.02 * 0.99)])
    F[0, 1] = 0.01
    B = np.array([0.01, 0.0, 0.1])
    res = newton_solve(p, p.zero_state(), F, B)
    results.append(("Newton converges on a coupled load", res.converged))
    x = res.state.x + 1e-3 * rng.standard_normal(p.n_dofs) * (p.T @ np.ones(p.compiled.n_free))
    r0, K, _ = p.condensed(x, B)
    d = rng.standard_normal(p.compiled.n_free)
    h = 1e-7
    rp, _, _ = p.condensed(x + h * (p.T @ d), B, need_tangent=False)
    rm, _, _ = p.condensed(x - h * (p.T @ d), B, need_tangent=False)
    fd = (rp - rm) / (2 * h)
    results.append(("tangent matches finite differences", np.linalg.norm(fd - K @ d) <= 1e-5 * np.linalg.norm(fd)))
    rec = average_all(p, res.state)
    results.append(("<F> equals F_M", np.abs(rec.F_avg - F).max() <= 1e-12))
    results.append(("<B> equals B_M", np.abs(rec.B_avg - B).max() <= 1e-12))
    results.append(("Cauchy stress is symmetric",
                    np.abs(rec.sigma_avg - rec.sigma_avg.T).max() <= 1e-8 * max(1.0, np.abs(rec.sigma_avg).max())))
    gap = hill_mandel_check(p, res.state, rng.standard_normal((3, 3)) * 1e-2, rng.standard_normal(3) * 1e-2)
    results.append(("Hill-Mandel gap below 1e-7", gap <= 1e-7))
    ok = True
    for name, passed in results:
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}", file=stream)
    return 0 if ok else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="mrerve", description="Magneto-elastic periodic RVE homogenization")
    ap.add_argument("--version", action="version", version=f"%(prog)s {code_version()}")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="solve the load path of a configuration and write CSV/VTK")
    r.add_argument("config")
    r.add_argument("--steps", type=int, help="override [load] steps")
    r.add_argument("--output", help="override [output] csv path")
    r.add_argument("--vtk", action="store_true", help="write VTK files")
    r.add_argument("--verbose", action="store_true", help="print Newton iteration log lines")
    r.add_argument("--linear-solver", choices=("direct", "iterative"))
    r.add_argument("--dump-constraints", metavar="PATH", help="write the constraint set as text")
    o = sub.add_parser("oracle", help="print the small-strain magnetostriction coefficients")
    o.add_argument("config", nargs="?")
    sub.add_parser("check", help="run built-in invariant checks on a 2x2x2 RVE")
    return ap


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.steps is not None:
        if args.steps < 1:
            raise ConfigError(["--steps must be >= 1"])
        cfg.load = replace(cfg.load, steps=args.steps)
    out = cfg.output
    cfg.output = replace(out, csv=args.output or out.csv, vtk=out.vtk or args.vtk,
                         verbose=out.verbose or args.verbose,
                         dump_constraints=args.dump_constraints or out.dump_constraints)
    newton = cfg.solver.newton
    cfg.solver = replace(cfg.solver, newton=replace(
        newton, verbose=cfg.output.verbose, linear_solver=args.linear_solver or newton.linear_solver))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "check":
            return run_check()
        if args.command == "oracle":
            params = load_config(args.config).particle.params() if args.config else None
            print("\n".join(coefficient_table(coefficients(params))))
            return 0
        cfg = apply_overrides(load_config(args.config), args)
        return run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
