"""Configuration-driven command line runs: ``scan``, ``solve``, ``probe``, ``speeds``.

A run is described by a TOML file.  Every section and key is validated
before any computation starts and unknown keys are rejected.  A minimal
solve configuration::

    [model]
    name = "advection"
    speeds = [1.0]

    [grid]
    N = 1
    n = 64

    [solve]
    T_request = 1.0

    [initial]
    profile = "sine"
    amplitude = 1.0

Exit codes:

====  =====================================================
0     success (solve reached its horizon, scan passed)
2     invalid configuration or inadmissible initial datum
3     hyperbolicity failure (failed scan or symbol error)
4     continuation halted or Picard iteration did not converge
5     internal or I/O error
====  =====================================================
"""
from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import (
    ConfigError,
    HypError,
    IoError,
    NoConvergence,
    SingularTimeMatrix,
    StateOutsideDomain,
    SymbolError,
    SymbolFailure,
)
from .models import (
    EquationOfState,
    characteristic_speeds,
    four_velocity,
    make_advection,
    make_bulk_viscous,
    make_burgers,
    make_constant_coefficient,
    make_relativistic_euler,
    make_sink,
)
from .solver import SolveConfig, continuous_dependence_probe, picard_solve
from .spectral import TorusField, TorusGrid, read_snapshot, write_field_csv, write_snapshot
from .symbol import SamplePlan, SystemDef, scan_hyperbolicity, unit_directions

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPERBOLICITY = 3
EXIT_HALTED = 4
EXIT_INTERNAL = 5

COMMANDS = ("scan", "solve", "probe", "speeds")
PROFILES = ("sine", "gaussian-bump", "constant-plus-sine")
FLUIDS = ("euler", "bulk")

_MODEL_KEYS = {
    "advection": {"speeds"},
    "burgers": set(),
    "sink": {"speed", "rate"},
    "constant": {"matrices", "source"},
    "euler": {"eos", "normalization_slack"},
    "bulk": {"eos", "tau", "zeta", "normalization_slack"},
}
_EOS_KEYS = {
    "barotropic": {"K", "gamma"},
    "linear": {"cs2"},
    "mixed": {"a", "b", "gamma"},
    "table": {"path"},
}
_SECTIONS = {"command", "seed", "output", "model", "grid", "solve", "initial", "scan",
             "probe", "speeds"}
_INITIAL_KEYS = {"profile", "amplitude", "wavenumber", "width", "center", "background",
                 "snapshot", "velocity", "scalars", "perturb"}
_SCAN_KEYS = {"states", "directions", "points", "times", "radius", "max_witnesses",
              "low", "high", "v_max", "rho", "aux", "Pi"}
_PROBE_KEYS = {"deltas"}
_SPEEDS_KEYS = {"variable", "start", "stop", "count", "direction", "state", "velocity",
                "scalars"}
_SOLVE_KEYS = {f.name for f in fields(SolveConfig)} - {"N"}


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """A fully validated run description."""

    command: str
    model: dict
    grid: TorusGrid
    solve: SolveConfig
    initial: dict
    output: Path
    seed: int
    scan: dict = field(default_factory=dict)
    probe: dict = field(default_factory=dict)
    speeds: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    base_dir: Path = Path(".")


def _require_table(raw, name) -> dict:
    val = raw.get(name, {})
    if not isinstance(val, dict):
        raise ConfigError(f"[{name}] must be a table")
    return val


def _reject_unknown(section: str, table: dict, allowed: set):
    extra = sorted(set(table) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(extra)}")


def _number(section, key, value, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}")
    if integer and not isinstance(value, int):
        raise ConfigError(f"[{section}] {key} must be an integer")
    if not math.isfinite(value):
        raise ConfigError(f"[{section}] {key} must be finite")
    if positive and value <= 0:
        raise ConfigError(f"[{section}] {key} must be positive")
    return value


def _numbers(section, key, value, length=None):
    if not isinstance(value, list):
        raise ConfigError(f"[{section}] {key} must be a list of numbers")
    out = [float(_number(section, key, v)) for v in value]
    if length is not None and len(out) != length:
        raise ConfigError(f"[{section}] {key} must have {length} entries, got {len(out)}")
    return out


def _range(section, key, value):
    lo, hi = _numbers(section, key, value, 2)
    if not lo <= hi:
        raise ConfigError(f"[{section}] {key} must be [low, high] with low <= high")
    return lo, hi


def _validate_eos(model: dict, base_dir: Path) -> dict:
    eos = model.get("eos")
    if not isinstance(eos, dict):
        raise ConfigError("[model] eos must be a table with a 'kind' key")
    kind = eos.get("kind")
    if kind not in _EOS_KEYS:
        raise ConfigError(f"[model.eos] kind must be one of {sorted(_EOS_KEYS)}, got {kind!r}")
    _reject_unknown("model.eos", eos, _EOS_KEYS[kind] | {"kind"})
    missing = _EOS_KEYS[kind] - set(eos)
    if missing:
        raise ConfigError(f"[model.eos] missing key(s): {', '.join(sorted(missing))}")
    if kind == "table":
        if not isinstance(eos["path"], str):
            raise ConfigError("[model.eos] path must be a string")
        if not (base_dir / eos["path"]).is_file():
            raise ConfigError(f"[model.eos] table file not found: {eos['path']}")
    else:
        for k in _EOS_KEYS[kind]:
            _number("model.eos", k, eos[k])
    return eos


def _validate_model(model: dict, base_dir: Path) -> dict:
    name = model.get("name")
    if name not in _MODEL_KEYS:
        raise ConfigError(f"[model] name must be one of {sorted(_MODEL_KEYS)}, got {name!r}")
    _reject_unknown("model", model, _MODEL_KEYS[name] | {"name"})
    if name == "advection":
        if "speeds" not in model or not model["speeds"]:
            raise ConfigError("[model] advection needs a nonempty 'speeds' list")
        _numbers("model", "speeds", model["speeds"])
    elif name == "sink":
        for k in ("speed", "rate"):
            if k in model:
                _number("model", k, model[k])
    elif name == "constant":
        mats = model.get("matrices")
        if not isinstance(mats, list) or not mats:
            raise ConfigError("[model] constant needs 'matrices', one square matrix per dimension")
        try:
            arrs = [np.asarray(a, dtype=float) for a in mats]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[model] matrices are not numeric: {exc}") from exc
        m = arrs[0].shape[0] if arrs[0].ndim == 2 else -1
        if any(a.shape != (m, m) for a in arrs):
            raise ConfigError("[model] matrices must all be square of the same size")
        if "source" in model:
            _numbers("model", "source", model["source"], m)
    elif name in FLUIDS:
        _validate_eos(model, base_dir)
        if "normalization_slack" in model:
            _number("model", "normalization_slack", model["normalization_slack"], positive=True)
        if name == "bulk":
            for k in ("tau", "zeta"):
                if k not in model:
                    raise ConfigError(f"[model] bulk needs '{k}'")
                _number("model", k, model[k], positive=True)
    return model


def _validate_initial(init: dict, model_name: str, base_dir: Path, needed: bool = True) -> dict:
    _reject_unknown("initial", init, _INITIAL_KEYS)
    if "snapshot" in init:
        others = set(init) - {"snapshot"}
        if others:
            raise ConfigError("[initial] snapshot excludes profile keys: " + ", ".join(sorted(others)))
        if not isinstance(init["snapshot"], str):
            raise ConfigError("[initial] snapshot must be a path string")
        if not (base_dir / init["snapshot"]).is_file():
            raise ConfigError(f"[initial] snapshot not found: {init['snapshot']}")
        return init
    profile = init.get("profile", "sine")
    if profile not in PROFILES:
        raise ConfigError(f"[initial] profile must be one of {list(PROFILES)}, got {profile!r}")
    amp = init.get("amplitude", 1.0)
    if isinstance(amp, list):
        _numbers("initial", "amplitude", amp)
    else:
        _number("initial", "amplitude", amp)
    if "wavenumber" in init:
        _number("initial", "wavenumber", init["wavenumber"], integer=True)
    if "width" in init:
        _number("initial", "width", init["width"], positive=True)
    if "center" in init:
        _numbers("initial", "center", init["center"])
    if model_name in FLUIDS:
        if "background" in init:
            raise ConfigError("[initial] fluid models use 'velocity' and 'scalars', not 'background'")
        if "velocity" in init:
            _numbers("initial", "velocity", init["velocity"], 3)
        if "scalars" not in init and needed:
            raise ConfigError("[initial] fluid models need 'scalars' (rho, aux[, Pi])")
        if "scalars" in init:
            _numbers("initial", "scalars", init["scalars"])
        if "perturb" in init and not (isinstance(init["perturb"], list)
                                      and all(isinstance(p, str) for p in init["perturb"])):
            raise ConfigError("[initial] perturb must be a list of component names")
    else:
        for k in ("velocity", "scalars", "perturb"):
            if k in init:
                raise ConfigError(f"[initial] '{k}' only applies to fluid models")
        if "background" in init:
            _numbers("initial", "background", init["background"])
    return init


def _validate_scan(scan: dict) -> dict:
    _reject_unknown("scan", scan, _SCAN_KEYS)
    for k in ("states", "directions", "points", "max_witnesses"):
        if k in scan:
            _number("scan", k, scan[k], positive=True, integer=True)
    if "times" in scan:
        _numbers("scan", "times", scan["times"])
    if "radius" in scan:
        _number("scan", "radius", scan["radius"], positive=True)
    if "v_max" in scan:
        v = _number("scan", "v_max", scan["v_max"])
        if not 0 <= v < 1:
            raise ConfigError("[scan] v_max must lie in [0, 1)")
    for k in ("rho", "aux", "Pi"):
        if k in scan:
            _range("scan", k, scan[k])
    for k in ("low", "high"):
        if k in scan:
            _numbers("scan", k, scan[k])
    return scan


def _validate_probe(probe: dict) -> dict:
    _reject_unknown("probe", probe, _PROBE_KEYS)
    if "deltas" in probe:
        d = _numbers("probe", "deltas", probe["deltas"])
        if any(x < 0 for x in d) or not d:
            raise ConfigError("[probe] deltas must be a nonempty list of nonnegative numbers")
    return probe


def _validate_speeds(sp: dict) -> dict:
    _reject_unknown("speeds", sp, _SPEEDS_KEYS)
    if "variable" in sp and not isinstance(sp["variable"], str):
        raise ConfigError("[speeds] variable must be a string")
    for k in ("start", "stop"):
        if k in sp:
            _number("speeds", k, sp[k])
    if "count" in sp:
        _number("speeds", "count", sp["count"], positive=True, integer=True)
    for k in ("direction", "state", "velocity", "scalars"):
        if k in sp:
            _numbers("speeds", k, sp[k])
    return sp


def parse_config(raw: dict, command: str | None = None, out: str | None = None,
                 seed: int | None = None, base_dir: Path | str = ".") -> RunConfig:
    """Validate a parsed TOML document; command-line values override the file."""
    base_dir = Path(base_dir)
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a table")
    _reject_unknown("top level", raw, _SECTIONS)
    file_cmd = raw.get("command")
    if file_cmd is not None and command is not None and file_cmd != command:
        raise ConfigError(f"config is for command {file_cmd!r}, invoked as {command!r}")
    cmd = command or file_cmd
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {list(COMMANDS)}, got {cmd!r}")
    if seed is None:
        seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    output = out if out is not None else raw.get("output")
    if not isinstance(output, str) or not output:
        raise ConfigError("an output directory is required (--out or 'output')")

    model = _validate_model(dict(_require_table(raw, "model")), base_dir)
    grid_t = _require_table(raw, "grid")
    _reject_unknown("grid", grid_t, {"N", "n"})
    N = _number("grid", "N", grid_t.get("N", 1), positive=True, integer=True)
    n = _number("grid", "n", grid_t.get("n", 64), positive=True, integer=True)
    try:
        grid = TorusGrid(N, n)
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from exc

    solve_t = _require_table(raw, "solve")
    _reject_unknown("solve", solve_t, _SOLVE_KEYS)
    try:
        # default regularity index: the smallest of 2, 2.5, 3, ... above the N/2 + 1 threshold
        solve = SolveConfig(N=N, **{"s": max(2.0, N / 2 + 1.5), **solve_t})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[solve] {exc}") from exc

    initial = _validate_initial(dict(_require_table(raw, "initial")), model["name"], base_dir,
                                needed=cmd in ("solve", "probe"))
    cfg = RunConfig(
        command=cmd, model=model, grid=grid, solve=solve, initial=initial,
        output=Path(output), seed=seed,
        scan=_validate_scan(dict(_require_table(raw, "scan"))),
        probe=_validate_probe(dict(_require_table(raw, "probe"))),
        speeds=_validate_speeds(dict(_require_table(raw, "speeds"))),
        raw=raw, base_dir=base_dir)
    system = build_system(cfg)
    if system.N != N:
        raise ConfigError(f"model {model['name']!r} lives in {system.N} dimension(s), grid has N={N}")
    return cfg


def load_config(path, command: str | None = None, out: str | None = None,
                seed: int | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw, command, out, seed, base_dir=path.parent)


# ---------------------------------------------------------------------------
# systems and initial data


def build_eos(spec: dict, base_dir: Path, aux_label: str) -> EquationOfState:
    kind = spec["kind"]
    if kind == "barotropic":
        return EquationOfState.barotropic(spec["K"], spec["gamma"], aux_label)
    if kind == "linear":
        return EquationOfState.linear(spec["cs2"], aux_label)
    if kind == "mixed":
        return EquationOfState.mixed(spec["a"], spec["b"], spec["gamma"], aux_label)
    try:
        return EquationOfState.from_csv(base_dir / spec["path"], aux_label)
    except ValueError as exc:
        raise ConfigError(f"[model.eos] {exc}") from exc


def build_system(cfg: RunConfig) -> SystemDef:
    m = cfg.model
    name = m["name"]
    if name == "advection":
        return make_advection(m["speeds"])
    if name == "burgers":
        return make_burgers()
    if name == "sink":
        return make_sink(m.get("speed", 1.0), m.get("rate", 1.0))
    if name == "constant":
        return make_constant_coefficient(m["matrices"], m.get("source"))
    slack = m.get("normalization_slack", 1e-2)
    N = cfg.grid.N
    if N > 3:
        raise ConfigError("fluid models need N <= 3")
    if name == "euler":
        return make_relativistic_euler(build_eos(m["eos"], cfg.base_dir, "s"), N, slack)
    return make_bulk_viscous(build_eos(m["eos"], cfg.base_dir, "n"), m["tau"], m["zeta"], N, slack)


def _fluid_names(model_name: str) -> list[str]:
    return ["v1", "v2", "v3", "rho", "s"] if model_name == "euler" else \
        ["v1", "v2", "v3", "rho", "n", "Pi"]


def _shape(grid: TorusGrid, init: dict) -> np.ndarray:
    """Profile shape on the grid (without amplitude or background)."""
    x = grid.points
    profile = init.get("profile", "sine")
    if profile == "gaussian-bump":
        width = float(init.get("width", 0.5))
        center = np.asarray(init.get("center", [math.pi] * grid.N), float)
        if center.size != grid.N:
            raise ConfigError(f"[initial] center must have {grid.N} entries")
        out = np.zeros(grid.shape)
        shifts = np.array(np.meshgrid(*[[-1, 0, 1]] * grid.N, indexing="ij")).reshape(grid.N, -1).T
        for sh in shifts:
            d2 = sum((x[i] - center[i] + 2 * math.pi * sh[i]) ** 2 for i in range(grid.N))
            out += np.exp(-d2 / (2 * width ** 2))
        return out
    k = int(init.get("wavenumber", 1))
    return np.sin(k * sum(x[i] for i in range(grid.N)))


def _per_component(value, count: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, float))
    if arr.size == 1:
        return np.full(count, float(arr[0]))
    if arr.size != count:
        raise ConfigError(f"[initial] {name} needs 1 or {count} entries, got {arr.size}")
    return arr


def build_initial(cfg: RunConfig, system: SystemDef) -> TorusField:
    init = cfg.initial
    grid = cfg.grid
    if "snapshot" in init:
        try:
            field_, _ = read_snapshot(cfg.base_dir / init["snapshot"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"[initial] cannot load snapshot: {exc}") from exc
        if field_.grid != grid or field_.m != system.m:
            raise ConfigError("[initial] snapshot does not match the grid or the model size")
        return field_
    shape = _shape(grid, init)
    profile = init.get("profile", "sine")
    if cfg.model["name"] not in FLUIDS:
        amp = _per_component(init.get("amplitude", 1.0), system.m, "amplitude")
        if "background" in init:
            bg = _per_component(init["background"], system.m, "background")
        else:
            bg = np.zeros(system.m)
        if profile == "constant-plus-sine" and "background" not in init:
            raise ConfigError("[initial] constant-plus-sine needs 'background'")
        vals = bg.reshape((-1,) + (1,) * grid.N) + amp.reshape((-1,) + (1,) * grid.N) * shape
        return TorusField(grid, vals)
    # fluids: perturb primitive variables, then rebuild a normalized four-velocity
    names = _fluid_names(cfg.model["name"])
    velocity = list(init.get("velocity", [0.0, 0.0, 0.0]))
    scalars = list(init["scalars"])
    if len(scalars) != len(names) - 3:
        raise ConfigError(f"[initial] scalars must be {names[3:]}")
    base = velocity + scalars
    perturb = init.get("perturb", ["rho"])
    unknown = sorted(set(perturb) - set(names))
    if unknown:
        raise ConfigError(f"[initial] cannot perturb {unknown}; choose from {names}")
    amp = _per_component(init.get("amplitude", 0.0), len(perturb), "amplitude")
    prim = np.stack([np.full(grid.shape, b) for b in base])
    for a, name in zip(amp, perturb):
        prim[names.index(name)] += a * shape
    v = prim[:3]
    speed2 = np.sum(v * v, axis=0)
    if np.any(speed2 >= 1):
        raise ConfigError("[initial] three-velocity reaches the speed of light")
    gamma = 1.0 / np.sqrt(1.0 - speed2)
    u = np.concatenate([gamma[None], gamma[None] * v])
    return TorusField(grid, np.concatenate([u, prim[3:]]))


# ---------------------------------------------------------------------------
# commands


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")


def sample_states(cfg: RunConfig, system: SystemDef, rng: np.random.Generator, count: int) -> list:
    """Random admissible states for a scan (rejection sampling)."""
    scan = cfg.scan
    name = cfg.model["name"]
    states: list = []
    attempts = 0
    while len(states) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise ConfigError("[scan] could not sample enough admissible states from the given ranges")
        if name in FLUIDS:
            v_max = float(scan.get("v_max", 0.9))
            d = rng.standard_normal(3)
            d /= max(np.linalg.norm(d), 1e-300)
            v = d * v_max * rng.uniform(0.0, 1.0)
            rho = rng.uniform(*scan.get("rho", [0.1, 2.0]))
            aux = rng.uniform(*scan.get("aux", [0.5, 1.5]))
            scal = [rho, aux]
            if name == "bulk":
                scal.append(rng.uniform(*scan.get("Pi", [-0.01, 0.01])))
            z = np.concatenate([four_velocity(v), scal])
        else:
            lo = _per_component(scan.get("low", -1.0), system.m, "low")
            hi = _per_component(scan.get("high", 1.0), system.m, "high")
            z = rng.uniform(lo, hi)
        if bool(system.domain.contains(z)):
            states.append(z)
    return states


def _run_scan(cfg: RunConfig, system: SystemDef, out: Path, results: dict) -> tuple[int, str, list]:
    scan = cfg.scan
    rng = np.random.default_rng(cfg.seed)
    states = sample_states(cfg, system, rng, int(scan.get("states", 200)))
    points = [rng.uniform(0, 2 * math.pi, cfg.grid.N) for _ in range(int(scan.get("points", 1)))]
    dirs = unit_directions(cfg.grid.N, int(scan.get("directions", 50)),
                           int(rng.integers(0, 2 ** 31)))
    plan = SamplePlan(times=list(scan.get("times", [0.0])), points=points, states=states,
                      directions=list(dirs), radius=float(scan.get("radius", math.inf)),
                      max_witnesses=int(scan.get("max_witnesses", 10)), seed=cfg.seed)
    report = scan_hyperbolicity(system, plan)
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "plan.json").write_text(json.dumps(plan.to_dict(), indent=2, sort_keys=True) + "\n")
    results.update(verdict=report.verdict, lambda0=report.lambda0, lambda1=report.lambda1,
                   samples=report.samples)
    code = EXIT_OK if report.passed else EXIT_HYPERBOLICITY
    return code, report.verdict, ["report.json", "plan.json"]


def _run_solve(cfg: RunConfig, system: SystemDef, out: Path, results: dict) -> tuple[int, str, list]:
    u0 = build_initial(cfg, system)
    outcome = picard_solve(system, u0, cfg.solve)
    traj = outcome.trajectory
    outcome.write_energy_csv(out / "energy.csv")
    write_field_csv(out / "initial.csv", u0)
    write_field_csv(out / "final.csv", traj.final)
    write_snapshot(out / "initial.bin", u0, traj.start)
    write_snapshot(out / "final.bin", traj.final, traj.end)
    (out / "history.json").write_text(outcome.history.to_json() + "\n")
    st = outcome.continuation
    results.update(status=outcome.status, continuation=st.kind, t=st.t,
                   T_actual=outcome.T_actual,
                   evidence={k: v for k, v in st.evidence.items()})
    code = EXIT_OK if outcome.converged else EXIT_HALTED
    return code, st.kind, ["energy.csv", "initial.csv", "final.csv", "initial.bin", "final.bin",
                           "history.json"]


def _run_probe(cfg: RunConfig, system: SystemDef, out: Path, results: dict) -> tuple[int, str, list]:
    u0 = build_initial(cfg, system)
    deltas = cfg.probe.get("deltas", [1e-2, 1e-3, 1e-4])
    table = continuous_dependence_probe(system, u0, deltas, cfg.solve)
    table.write_csv(out / "dependence.csv")
    results.update(order=table.order, base_status=table.base.status)
    return EXIT_OK, "ok", ["dependence.csv"]


def _speed_state(cfg: RunConfig, system: SystemDef, variable: str, value: float) -> np.ndarray:
    sp = cfg.speeds
    name = cfg.model["name"]
    if name in FLUIDS:
        names = _fluid_names(name)
        velocity = np.asarray(sp.get("velocity", [0.0, 0.0, 0.0]), float)
        scalars = sp.get("scalars")
        if scalars is None:
            scalars = cfg.initial.get("scalars")
        if scalars is None or len(scalars) != len(names) - 3:
            raise ConfigError(f"[speeds] scalars must be {names[3:]}")
        prim = np.concatenate([velocity, np.asarray(scalars, float)])
        if variable == "v":
            d = np.asarray(sp.get("direction", [1.0] + [0.0] * (cfg.grid.N - 1)), float)
            d3 = np.zeros(3)
            d3[:d.size] = d / np.linalg.norm(d)
            prim[:3] = value * d3
        elif variable in names:
            prim[names.index(variable)] = value
        else:
            raise ConfigError(f"[speeds] variable must be 'v' or one of {names}")
        if float(prim[:3] @ prim[:3]) >= 1:
            raise ConfigError("[speeds] sweep reaches the speed of light")
        return np.concatenate([four_velocity(prim[:3]), prim[3:]])
    state = np.asarray(sp.get("state", [0.0] * system.m), float)
    if state.size != system.m:
        raise ConfigError(f"[speeds] state must have {system.m} entries")
    comps = [f"u{c}" for c in range(system.m)]
    if variable not in comps:
        raise ConfigError(f"[speeds] variable must be one of {comps}")
    state = state.copy()
    state[comps.index(variable)] = value
    return state


def _run_speeds(cfg: RunConfig, system: SystemDef, out: Path, results: dict) -> tuple[int, str, list]:
    sp = cfg.speeds
    fluid = cfg.model["name"] in FLUIDS
    variable = sp.get("variable", "v" if fluid else "u0")
    values = np.linspace(float(sp.get("start", 0.0)), float(sp.get("stop", 0.9)),
                         int(sp.get("count", 10)))
    direction = np.asarray(sp.get("direction", [1.0] + [0.0] * (cfg.grid.N - 1)), float)
    if direction.size != cfg.grid.N or not np.linalg.norm(direction) > 0:
        raise ConfigError(f"[speeds] direction must be a nonzero vector with {cfg.grid.N} entries")
    rows = []
    for val in values:
        z = _speed_state(cfg, system, variable, float(val))
        if not bool(system.domain.contains(z)):
            raise ConfigError(f"[speeds] sweep state {variable}={val:.6g} is not admissible")
        rows.append([val, *characteristic_speeds(system, 0.0, None, z, direction)])
    _write_csv(out / "speeds.csv", [variable] + [f"speed_{k}" for k in range(system.m)], rows)
    results.update(rows=len(rows))
    return EXIT_OK, "ok", ["speeds.csv"]


_RUNNERS = {"scan": _run_scan, "solve": _run_solve, "probe": _run_probe, "speeds": _run_speeds}


@dataclass
class ExitReport:
    exit_code: int
    status: str
    artifacts: list
    message: str = ""
    results: dict = field(default_factory=dict)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, Path):
        return str(v)
    return v


def _exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (SymbolError, SymbolFailure, SingularTimeMatrix)):
        return EXIT_HYPERBOLICITY
    if isinstance(exc, StateOutsideDomain) and getattr(exc, "t", None) == 0.0:
        return EXIT_CONFIG
    if isinstance(exc, NoConvergence):
        return EXIT_HALTED
    return EXIT_INTERNAL


def run(cfg: RunConfig) -> ExitReport:
    """Execute one configured command and write its artifacts plus ``manifest.json``."""
    start = time.perf_counter()
    out = cfg.output
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return ExitReport(EXIT_INTERNAL, "io_error", [], f"cannot create {out}: {exc}")
    results: dict = {}
    artifacts: list = []
    message = ""
    try:
        system = build_system(cfg)
        code, status, artifacts = _RUNNERS[cfg.command](cfg, system, out, results)
    except HypError as exc:
        code, status, message = _exit_code_for(exc), type(exc).__name__, str(exc)
    except OSError as exc:
        code, status, message = EXIT_INTERNAL, "IoError", str(exc)
    manifest = {
        "schema_version": 1,
        "command": cfg.command,
        "seed": cfg.seed,
        "config": _jsonable(cfg.raw),
        "versions": {"torushyp": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": time.perf_counter() - start,
        "exit_code": code,
        "status": status,
        "message": message,
        "results": _jsonable(results),
        "artifacts": sorted(artifacts),
    }
    try:
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        return ExitReport(EXIT_INTERNAL, "IoError", artifacts, str(exc), results)
    return ExitReport(code, status, artifacts, message, results)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="torushyp", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="TOML run configuration")
    parser.add_argument("--out", help="output directory (overrides 'output' in the config)")
    parser.add_argument("--seed", type=int, help="64-bit sampling seed (overrides the config)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.command, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IoError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    report = run(cfg)
    line = f"{cfg.command}: {report.status} (exit {report.exit_code})"
    if report.message:
        line += f": {report.message}"
    print(line, file=sys.stderr if report.exit_code else sys.stdout)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
