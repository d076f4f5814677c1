"""TOML run configuration.

A config file has up to five tables; every key is optional and unknown keys
are rejected::

    [parameters]        # DimensionalParams overrides (physical units)
    gamma1 = 1e-3
    [grid]
    nx = 100
    ny = 100
    [stepper]
    dt = 0.01           # or "auto" to follow the stability bound
    [scenario]
    id = "S1"           # S1..S5 or "custom"
    model = "linear"
    seed = 0
    horizon = 250.0
    snapshots = [5.0, 50.0, 100.0, 250.0]
    [output]
    dir = "runs/S1"
    raster = true

Explicitly set ``gamma1``/``gamma2``/``gamma3`` replace the scenario's own
sensitivities; everything else about the scenario (initial data) is kept.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .discretization import ModelKind
from .grid import FIELD_NAMES, Grid
from .params import DimensionalParams, NondimParams, ParameterError
from .scenarios import (
    InitialConditionSpec,
    ScenarioSpec,
    nondim_for,
    scenario_params,
)
from .stepper import StepperConfig


class ConfigError(ValueError):
    """Bad configuration: syntax, unknown key, wrong type or range."""

    def __init__(self, msg: str, key: str | None = None, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + msg)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "runs/S1"
    raster: bool = True
    fields: tuple[str, ...] = FIELD_NAMES

    def __post_init__(self):
        bad = [f for f in self.fields if f not in FIELD_NAMES]
        if bad:
            raise ValueError(f"unknown output fields {bad}")


@dataclass(frozen=True)
class RunConfig:
    params: DimensionalParams = field(default_factory=DimensionalParams)
    grid: Grid = field(default_factory=Grid)
    stepper: StepperConfig = field(default_factory=StepperConfig)
    scenario: ScenarioSpec = field(default_factory=lambda: scenario_params("S1")[0])
    output: OutputConfig = field(default_factory=OutputConfig)

    def nondim(self) -> NondimParams:
        return nondim_for(self.scenario, self.params)

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self), default=_jsonable))

    def digest(self) -> str:
        """SHA-256 of the resolved configuration (not of the file text)."""
        text = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, ModelKind):
        return obj.value
    raise TypeError(f"not serialisable: {type(obj).__name__}")


_PARAM_KEYS = {f.name for f in dataclasses.fields(DimensionalParams)}
_GRID_KEYS = {"nx", "ny"}
_STEPPER_KEYS = {f.name for f in dataclasses.fields(StepperConfig)}
_IC_KEYS = {f.name for f in dataclasses.fields(InitialConditionSpec)}
_SCENARIO_KEYS = {"id", "model", "seed", "horizon", "snapshots"} | _IC_KEYS
_OUTPUT_KEYS = {"dir", "raster", "fields"}
_SECTIONS = {
    "parameters": _PARAM_KEYS,
    "grid": _GRID_KEYS,
    "stepper": _STEPPER_KEYS,
    "scenario": _SCENARIO_KEYS,
    "output": _OUTPUT_KEYS,
}
_INT_KEYS = {"grid.nx", "grid.ny", "stepper.max_linear_iters", "scenario.seed"}
_STR_KEYS = {"scenario.id", "scenario.model", "scenario.v0_mode", "output.dir"}
_BOOL_KEYS = {"output.raster"}
_LIST_KEYS = {"parameters.gamma_range", "scenario.snapshots", "scenario.gauss_center",
              "output.fields"}


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    """Best-effort line number of ``[section]`` or of ``key`` inside it."""
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("["):
            current = line.strip("[] ")
            if key is None and current == section:
                return no
        elif key is not None and current == section and line.split("=", 1)[0].strip() == key:
            return no
    return None


def _check_type(name: str, value, line):
    if name in _BOOL_KEYS:
        ok = isinstance(value, bool)
    elif name in _STR_KEYS:
        ok = isinstance(value, str)
    elif name in _LIST_KEYS:
        ok = isinstance(value, list)
    elif name == "stepper.dt":
        ok = value == "auto" or (isinstance(value, (int, float)) and not isinstance(value, bool))
    elif name in _INT_KEYS:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if not ok:
        raise ConfigError(f"{name}: unexpected value {value!r}", name, line)


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc.msg}", line=exc.lineno) from None

    for section, body in raw.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]", section, _line_of(text, section))
        if not isinstance(body, dict):
            raise ConfigError(f"{section} must be a table", section)
        for key, value in body.items():
            name = f"{section}.{key}"
            line = _line_of(text, section, key)
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {name}", name, line)
            _check_type(name, value, line)

    def build(section, factory, **kwargs):
        try:
            return factory(**kwargs)
        except ParameterError as exc:
            raise ConfigError(str(exc), f"{section}.{exc.name}",
                              _line_of(text, section, exc.name)) from None
        except (ValueError, TypeError) as exc:
            named = [k for k in raw.get(section, {}) if k in str(exc)]
            key = named[0] if named else None
            raise ConfigError(f"[{section}] {exc}", f"{section}.{key}" if key else section,
                              _line_of(text, section, key)) from None

    p_raw = dict(raw.get("parameters", {}))
    if "gamma_range" in p_raw:
        p_raw["gamma_range"] = tuple(p_raw["gamma_range"])
    params = build("parameters", DimensionalParams, **p_raw)

    grid = build("grid", Grid, **raw.get("grid", {}))

    st_raw = dict(raw.get("stepper", {}))
    if st_raw.get("dt") == "auto":
        st_raw["dt"] = None
    stepper = build("stepper", StepperConfig, **st_raw)

    sc_raw = dict(raw.get("scenario", {}))
    sid = sc_raw.pop("id", "S1")
    if sid == "custom":
        spec, _ = scenario_params("S1", params)
        spec = spec.replace(id="custom")
    else:
        spec = build("scenario", lambda: scenario_params(sid, params)[0])
    ic_raw = {k: sc_raw.pop(k) for k in list(sc_raw) if k in _IC_KEYS}
    if "gauss_center" in ic_raw:
        ic_raw["gauss_center"] = tuple(ic_raw["gauss_center"])
    ic = build("scenario", lambda: dataclasses.replace(spec.ic, **ic_raw)) if ic_raw else spec.ic
    changes = dict(ic=ic)
    if "model" in sc_raw:
        changes["model"] = sc_raw["model"]
    if "seed" in sc_raw:
        changes["rng_seed"] = sc_raw["seed"]
    if "horizon" in sc_raw:
        changes["horizon"] = float(sc_raw["horizon"])
    if "snapshots" in sc_raw:
        changes["snapshots"] = tuple(float(t) for t in sc_raw["snapshots"])
    elif "horizon" in sc_raw:
        changes["snapshots"] = tuple(t for t in spec.snapshots if t <= changes["horizon"])
    if "gamma1" in p_raw:
        changes["g1_t"] = params.gamma1 * params.eta0
    if "gamma2" in p_raw:
        changes["g2_t"] = params.gamma2 * params.eta0
    if "gamma3" in p_raw:
        changes["g3_t"] = params.gamma3
    spec = build("scenario", spec.replace, **changes)
    if spec.snapshots and (min(spec.snapshots) < 0 or max(spec.snapshots) > spec.horizon):
        raise ConfigError("scenario.snapshots must lie within [0, horizon]", "scenario.snapshots",
                          _line_of(text, "scenario", "snapshots"))
    if any(b < a for a, b in zip(spec.snapshots, spec.snapshots[1:])):
        raise ConfigError("scenario.snapshots must be ascending", "scenario.snapshots",
                          _line_of(text, "scenario", "snapshots"))

    out_raw = dict(raw.get("output", {}))
    if "fields" in out_raw:
        out_raw["fields"] = tuple(out_raw["fields"])
    out_raw.setdefault("dir", f"runs/{spec.id}")
    output = build("output", OutputConfig, **out_raw)

    return RunConfig(params, grid, stepper, spec, output)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())
