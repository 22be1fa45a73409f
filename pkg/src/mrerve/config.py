"""Run configuration: INI text <-> validated :class:`RunConfig`.

Grammar (``configparser`` INI, ``#`` or ``;`` full-line comments)::

    [mesh]
    n = 8                  # one value or three
    L = 1 1 1
    inclusions =           # one "cx cy cz r" per line
        0.5 0.5 0.5 0.3
    gauge = tree           # tree | single | none

    [matrix] / [particle]
    model = yeoh           # yeoh: K C1 C2 C3 ; neo_hookean: E nu
    K = 1.25e6
    ...                    # plus mu0 ms_leg alpha_leg eta

    [load]
    kind = combined        # mechanical | magnetic | combined |
                           # stress_relaxed_magnetic | uniaxial_isochoric_magnetic
    F_final = 1.1 0.9 1.0101   # 3 numbers (diagonal) or 9 (row-major)
    B_final = 0 0 0.25
    steps = 10
    isochoric_zz = true
    relaxed = xx yy zz xy xz yz
    stress_tol = 1e-3

    [solver]
    rtol = 1e-8
    atol = 1e-10
    max_iter = 25
    line_search = true
    ls_factor = 0.5
    ls_max_cuts = 8
    linear_solver = direct # direct | iterative
    max_halvings = 4
    max_outer = 30
    fd_step = 1e-6
    broyden = false

    [output]
    csv = results.csv
    vtk = false
    vtk_stride = 1
    verbose = false
    dump_constraints =     # path; empty disables
"""

from __future__ import annotations

import configparser
import difflib
import re
from dataclasses import dataclass, field

import numpy as np

from .constitutive import NEO_HOOKEAN, YEOH, MaterialParams
from .driver import KINDS, VOIGT, LoadPath
from .mesh import Inclusion
from .solver import NewtonSettings


class ConfigError(ValueError):
    """Collects every problem found in a configuration."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


_DEFAULT_MATRIX = MaterialParams.matrix()
_DEFAULT_PARTICLE = MaterialParams.particle()
_MAGNETIC_KEYS = ("mu0", "ms_leg", "alpha_leg", "eta")
_YEOH_KEYS = ("K", "C1", "C2", "C3")
_NH_KEYS = ("E", "nu")
_COMPONENTS = {"xx": (0, 0), "yy": (1, 1), "zz": (2, 2), "xy": (0, 1), "xz": (0, 2), "yz": (1, 2),
               "yx": (0, 1), "zx": (0, 2), "zy": (1, 2)}
_NAMES = {v: k for k, v in reversed(list(_COMPONENTS.items()))}

SCHEMA = {
    "mesh": {"n": "8", "L": "1 1 1", "inclusions": "", "gauge": "tree"},
    "matrix": None,
    "particle": None,
    "load": {"kind": "combined", "F_final": "1 1 1", "B_final": "0 0 0", "steps": "10",
             "isochoric_zz": "false", "relaxed": "xx yy zz xy xz yz", "stress_tol": "1e-3"},
    "solver": {"rtol": "1e-8", "atol": "1e-10", "max_iter": "25", "line_search": "true",
               "ls_factor": "0.5", "ls_max_cuts": "8", "linear_solver": "direct", "max_halvings": "4",
               "max_outer": "30", "fd_step": "1e-6", "broyden": "false"},
    "output": {"csv": "results.csv", "vtk": "false", "vtk_stride": "1", "verbose": "false",
               "dump_constraints": ""},
}
_MODELS = {"yeoh": YEOH, "neo_hookean": NEO_HOOKEAN}
_MODEL_NAMES = {v: k for k, v in _MODELS.items()}
_MATERIAL_KEYS = ("model",) + _YEOH_KEYS + _NH_KEYS + _MAGNETIC_KEYS
# descriptive spellings offered as suggestions for the terse material keys
_ALIASES = {"bulk_modulus": "K", "youngs_modulus": "E", "young_modulus": "E", "poisson_ratio": "nu",
            "permeability": "mu0", "saturation_magnetization": "ms_leg", "langevin_alpha": "alpha_leg",
            "magnetizable": "eta"}


@dataclass
class PhaseConfig:
    """Material block as written; ``params()`` builds the constitutive object."""

    model: str = YEOH
    values: dict = field(default_factory=dict)

    def params(self) -> MaterialParams:
        mag = {k: self.values[k] for k in _MAGNETIC_KEYS if k in self.values}
        if "eta" in mag:
            mag["eta"] = int(mag["eta"])
        if self.model == NEO_HOOKEAN:
            return MaterialParams.neo_hookean(self.values["E"], self.values["nu"], **mag)
        mech = {k: self.values[k] for k in _YEOH_KEYS if k in self.values}
        return MaterialParams(**mech, **mag)

    @classmethod
    def from_params(cls, p: MaterialParams):
        vals = {k: getattr(p, k) for k in _YEOH_KEYS + _MAGNETIC_KEYS}
        return cls(YEOH, vals)


@dataclass
class MeshConfig:
    n: tuple = (8, 8, 8)
    L: tuple = (1.0, 1.0, 1.0)
    inclusions: tuple = ()
    gauge: str = "tree"


@dataclass
class SolverConfig:
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    max_halvings: int = 4
    max_outer: int = 30
    fd_step: float = 1e-6
    broyden: bool = False


@dataclass
class OutputConfig:
    csv: str = "results.csv"
    vtk: bool = False
    vtk_stride: int = 1
    verbose: bool = False
    dump_constraints: str = ""


@dataclass
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    matrix: PhaseConfig = field(default_factory=lambda: PhaseConfig.from_params(_DEFAULT_MATRIX))
    particle: PhaseConfig = field(default_factory=lambda: PhaseConfig.from_params(_DEFAULT_PARTICLE))
    load: LoadPath = field(default_factory=LoadPath)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def materials(self):
        return {0: self.matrix.params(), 1: self.particle.params()}


# parsing ---------------------------------------------------------------------

def _key_lines(text):
    """Line numbers of ``(section, key)`` definitions, for error messages."""
    where, section = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = no
        elif section and s and not s.startswith(("#", ";")) and not line[:1].isspace():
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            where.setdefault((section, key), no)
    return where


def _floats(s, counts, what, problems):
    try:
        vals = [float(v) for v in s.replace(",", " ").split()]
    except ValueError:
        problems.append(f"{what}: expected numbers, got {s!r}")
        return None
    if len(vals) not in counts:
        problems.append(f"{what}: expected {' or '.join(map(str, counts))} numbers, got {len(vals)}")
        return None
    return vals


def _bool(s, what, problems):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    problems.append(f"{what}: expected true/false, got {s!r}")
    return False


def _number(s, cast, what, problems):
    try:
        if cast is int:
            v = float(s)
            if v != int(v):
                raise ValueError
            return int(v)
        return cast(s)
    except ValueError:
        problems.append(f"{what}: expected {cast.__name__}, got {s!r}")
        return cast(0)


def parse_config(text: str) -> RunConfig:
    """Parse and validate INI text; raises :class:`ConfigError` listing all problems."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.ParsingError as exc:
        raise ConfigError([f"line {no}: cannot parse {line.strip()!r}" for no, line in exc.errors]) from None
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError([f"line {line}: {exc.message}" if line else str(exc)]) from None
    lines = _key_lines(text)
    problems = []

    def at(section, key=None):
        no = lines.get((section, key))
        return f"line {no}: " if no else ""

    for section in cp.sections():
        if section not in SCHEMA:
            hint = difflib.get_close_matches(section, SCHEMA, n=1)
            problems.append(f"{at(section)}unknown section [{section}]" + (f"; did you mean [{hint[0]}]?" if hint else ""))
            continue
        allowed = _MATERIAL_KEYS if SCHEMA[section] is None else tuple(SCHEMA[section])
        for key in cp[section]:
            if key not in allowed:
                hint = difflib.get_close_matches(key, allowed, n=1, cutoff=0.5)
                if not hint and SCHEMA[section] is None:
                    hint = [_ALIASES[a] for a in difflib.get_close_matches(key.lower(), _ALIASES, n=1, cutoff=0.6)]
                problems.append(f"{at(section, key)}unknown key '{key}' in [{section}]"
                                + (f"; did you mean '{hint[0]}'?" if hint else ""))

    def get(section, key):
        if cp.has_option(section, key):
            return cp.get(section, key)
        return SCHEMA[section][key]

    cfg = RunConfig()
    # mesh
    n = _floats(get("mesh", "n"), (1, 3), "mesh.n", problems)
    if n:
        n = [int(v) for v in n] * (3 if len(n) == 1 else 1)
        if any(v < 2 for v in n):
            problems.append(f"{at('mesh', 'n')}mesh.n: need at least 2 cells per axis")
    L = _floats(get("mesh", "L"), (1, 3), "mesh.L", problems)
    if L:
        L = L * (3 if len(L) == 1 else 1)
        if any(v <= 0 for v in L):
            problems.append(f"{at('mesh', 'L')}mesh.L: lengths must be positive")
    incs = []
    for row in get("mesh", "inclusions").strip().splitlines():
        if not row.strip():
            continue
        vals = _floats(row, (4,), "mesh.inclusions", problems)
        if vals is None:
            continue
        if vals[3] <= 0:
            problems.append(f"{at('mesh', 'inclusions')}mesh.inclusions: radius must be positive, got {vals[3]:g}")
            continue
        incs.append(Inclusion(tuple(vals[:3]), vals[3]))
    gauge = get("mesh", "gauge").strip()
    if gauge not in ("tree", "single", "none"):
        problems.append(f"{at('mesh', 'gauge')}mesh.gauge: expected tree|single|none, got {gauge!r}")
    cfg.mesh = MeshConfig(tuple(n or (8, 8, 8)), tuple(L or (1.0, 1.0, 1.0)), tuple(incs), gauge)

    # materials
    for name, default in (("matrix", _DEFAULT_MATRIX), ("particle", _DEFAULT_PARTICLE)):
        if not cp.has_section(name):
            setattr(cfg, name, PhaseConfig.from_params(default))
            continue
        sec = cp[name]
        word = sec.get("model", "yeoh").strip()
        if word not in _MODELS:
            problems.append(f"{at(name, 'model')}{name}.model: expected yeoh|neo_hookean, got {word!r}")
            continue
        model = _MODELS[word]
        vals = {}
        if model == YEOH:
            vals.update({k: getattr(default, k) for k in _YEOH_KEYS})
        vals.update({k: getattr(default, k) for k in _MAGNETIC_KEYS})
        for key in _YEOH_KEYS + _NH_KEYS + _MAGNETIC_KEYS:
            if key in sec:
                if (model == YEOH and key in _NH_KEYS) or (model == NEO_HOOKEAN and key in _YEOH_KEYS):
                    problems.append(f"{at(name, key)}{name}.{key}: not a parameter of model {word}")
                    continue
                vals[key] = _number(sec[key], float, f"{name}.{key}", problems)
        if model == NEO_HOOKEAN:
            for key in _NH_KEYS:
                if key not in vals:
                    problems.append(f"{at(name)}{name}: model {word} requires '{key}'")
            if "nu" in vals and not -1.0 < vals["nu"] < 0.5:
                problems.append(f"{at(name, 'nu')}{name}.nu must lie in (-1, 0.5)")
        pc = PhaseConfig(model, vals)
        try:
            pc.params()
        except (ValueError, KeyError, TypeError) as exc:
            problems.append(f"{at(name)}[{name}]: {exc}")
        setattr(cfg, name, pc)

    # load
    kind = get("load", "kind").strip()
    if kind not in KINDS:
        hint = difflib.get_close_matches(kind, KINDS, n=1)
        problems.append(f"{at('load', 'kind')}load.kind: unknown {kind!r}" + (f"; did you mean {hint[0]!r}?" if hint else ""))
        kind = "combined"
    Fv = _floats(get("load", "F_final"), (3, 9), "load.F_final", problems) or [1.0, 1.0, 1.0]
    F = np.diag(Fv) if len(Fv) == 3 else np.array(Fv).reshape(3, 3)
    if np.linalg.det(F) <= 0:
        problems.append(f"{at('load', 'F_final')}load.F_final: det must be positive")
    Bv = _floats(get("load", "B_final"), (3,), "load.B_final", problems) or [0.0, 0.0, 0.0]
    steps = _number(get("load", "steps"), int, "load.steps", problems)
    if steps < 1:
        problems.append(f"{at('load', 'steps')}load.steps must be >= 1")
    relaxed = []
    for tok in get("load", "relaxed").split():
        if tok not in _COMPONENTS:
            problems.append(f"{at('load', 'relaxed')}load.relaxed: unknown component {tok!r}")
        elif _COMPONENTS[tok] not in relaxed:
            relaxed.append(_COMPONENTS[tok])
    tol = _number(get("load", "stress_tol"), float, "load.stress_tol", problems)
    if not tol > 0:
        problems.append(f"{at('load', 'stress_tol')}load.stress_tol must be positive")
    iso = _bool(get("load", "isochoric_zz"), "load.isochoric_zz", problems)

    # solver
    s = {k: get("solver", k) for k in SCHEMA["solver"]}
    backend = s["linear_solver"].strip()
    if backend not in ("direct", "iterative"):
        problems.append(f"{at('solver', 'linear_solver')}solver.linear_solver: expected direct|iterative, got {backend!r}")
    newton_kw = dict(
        rtol=_number(s["rtol"], float, "solver.rtol", problems),
        atol=_number(s["atol"], float, "solver.atol", problems),
        max_iter=_number(s["max_iter"], int, "solver.max_iter", problems),
        line_search=_bool(s["line_search"], "solver.line_search", problems),
        ls_factor=_number(s["ls_factor"], float, "solver.ls_factor", problems),
        ls_max_cuts=_number(s["ls_max_cuts"], int, "solver.ls_max_cuts", problems),
        linear_solver=backend,
    )
    out = OutputConfig(
        csv=get("output", "csv").strip(),
        vtk=_bool(get("output", "vtk"), "output.vtk", problems),
        vtk_stride=_number(get("output", "vtk_stride"), int, "output.vtk_stride", problems),
        verbose=_bool(get("output", "verbose"), "output.verbose", problems),
        dump_constraints=get("output", "dump_constraints").strip(),
    )
    if out.vtk_stride < 1:
        problems.append(f"{at('output', 'vtk_stride')}output.vtk_stride must be >= 1")
    newton_kw["verbose"] = out.verbose
    if problems:
        raise ConfigError(problems)
    try:
        cfg.load = LoadPath(kind, F, Bv, steps, iso, tuple(relaxed), tol)
        cfg.solver = SolverConfig(
            NewtonSettings(**newton_kw),
            max_halvings=_number(s["max_halvings"], int, "solver.max_halvings", problems),
            max_outer=_number(s["max_outer"], int, "solver.max_outer", problems),
            fd_step=_number(s["fd_step"], float, "solver.fd_step", problems),
            broyden=_bool(s["broyden"], "solver.broyden", problems),
        )
    except ValueError as exc:
        problems.append(str(exc))
    if problems:
        raise ConfigError(problems)
    cfg.output = out
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


# serialization -------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def serialize_config(cfg: RunConfig) -> str:
    """Canonical INI text; ``parse_config(serialize_config(c))`` reproduces ``c``."""
    out = ["[mesh]", f"n = {' '.join(map(str, cfg.mesh.n))}", f"L = {' '.join(map(_fmt, cfg.mesh.L))}"]
    out.append("inclusions =")
    out += [f"    {' '.join(map(_fmt, inc.center))} {_fmt(inc.radius)}" for inc in cfg.mesh.inclusions]
    out.append(f"gauge = {cfg.mesh.gauge}")
    for name in ("matrix", "particle"):
        pc = getattr(cfg, name)
        out += ["", f"[{name}]", f"model = {_MODEL_NAMES[pc.model]}"]
        for key in _MATERIAL_KEYS[1:]:
            if key in pc.values:
                val = pc.values[key]
                out.append(f"{key} = {_fmt(int(val)) if key == 'eta' else _fmt(val)}")
    ld = cfg.load
    out += ["", "[load]", f"kind = {ld.kind}",
            f"F_final = {' '.join(_fmt(v) for v in ld.F_final.ravel())}",
            f"B_final = {' '.join(_fmt(v) for v in ld.B_final)}",
            f"steps = {ld.steps}", f"isochoric_zz = {_fmt(ld.isochoric_zz)}",
            f"relaxed = {' '.join(_NAMES[c] for c in ld.relaxed)}",
            f"stress_tol = {_fmt(ld.stress_tol)}"]
    s, nw = cfg.solver, cfg.solver.newton
    out += ["", "[solver]", f"rtol = {_fmt(nw.rtol)}", f"atol = {_fmt(nw.atol)}", f"max_iter = {nw.max_iter}",
            f"line_search = {_fmt(nw.line_search)}", f"ls_factor = {_fmt(nw.ls_factor)}",
            f"ls_max_cuts = {nw.ls_max_cuts}", f"linear_solver = {nw.linear_solver}",
            f"max_halvings = {s.max_halvings}", f"max_outer = {s.max_outer}",
            f"fd_step = {_fmt(s.fd_step)}", f"broyden = {_fmt(s.broyden)}"]
    o = cfg.output
    out += ["", "[output]", f"csv = {o.csv}", f"vtk = {_fmt(o.vtk)}", f"vtk_stride = {o.vtk_stride}",
            f"verbose = {_fmt(o.verbose)}", f"dump_constraints = {o.dump_constraints}"]
    return "\n".join(out) + "\n"


def configs_equal(a: RunConfig, b: RunConfig) -> bool:
    return serialize_config(a) == serialize_config(b)


__all__ = ["ConfigError", "RunConfig", "PhaseConfig", "MeshConfig", "SolverConfig", "OutputConfig",
           "parse_config", "load_config", "serialize_config", "configs_equal", "VOIGT"]
