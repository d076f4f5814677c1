"""Initial conditions, the five reference scenarios, and run comparisons."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .discretization import ModelKind
from .grid import FIELD_NAMES, Field, Grid, State, diff, integrate, sup_norm
from .params import (
    DimensionalParams,
    NondimParams,
    nondimensionalize_linear,
    nondimensionalize_nonlinear,
)
from .stepper import RunStats, StepperConfig, run

SCENARIO_IDS = ("S1", "S2", "S3", "S4", "S5")
V0_MODES = ("uniform_random", "scaled_uniform_random", "constant")
DEFAULT_SNAPSHOTS = (5.0, 50.0, 100.0, 250.0)


@dataclass(frozen=True)
class InitialConditionSpec:
    u0_amp: float = 0.95
    m0_amp: float = 0.001
    n0_amp: float = 0.0001
    gauss_center: tuple[float, float] = (0.5, 0.5)
    gauss_width: float = 0.01  # denominator inside the exponential
    v0_mode: str = "uniform_random"
    v0_scale: float = 1e-4  # used by scaled_uniform_random
    v0_value: float = 0.5  # used by constant

    def __post_init__(self):
        for name in ("u0_amp", "m0_amp", "n0_amp"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.gauss_width > 0:
            raise ValueError("gauss_width must be positive")
        if self.v0_mode not in V0_MODES:
            raise ValueError(f"unknown v0_mode {self.v0_mode!r}; expected one of {V0_MODES}")
        if not 0 <= self.v0_scale <= 1 or not 0 <= self.v0_value <= 1:
            raise ValueError("v0_scale and v0_value must lie in [0, 1]")


@dataclass(frozen=True)
class ScenarioSpec:
    id: str = "S1"
    model: ModelKind = ModelKind.LINEAR
    g1_t: float = 1e-4
    g2_t: float = 1e-4
    g3_t: float = 0.0
    ic: InitialConditionSpec = field(default_factory=InitialConditionSpec)
    horizon: float = 250.0
    snapshots: tuple[float, ...] = DEFAULT_SNAPSHOTS
    rng_seed: int = 0

    def __post_init__(self):
        if self.id not in SCENARIO_IDS + ("custom",):
            raise ValueError(f"unknown scenario id {self.id!r}")
        object.__setattr__(self, "model", ModelKind(self.model))
        if min(self.g1_t, self.g2_t, self.g3_t) < 0:
            raise ValueError("taxis sensitivities must be nonnegative")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    def replace(self, **changes) -> ScenarioSpec:
        return dataclasses.replace(self, **changes)


def _gaussian(grid: Grid, amp: float, center, width: float) -> np.ndarray:
    X, Y = grid.mesh()
    cx, cy = center
    return amp * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / width)


def initial_v(spec: InitialConditionSpec, grid: Grid, seed: int) -> np.ndarray:
    if spec.v0_mode == "constant":
        return np.full(grid.shape, spec.v0_value)
    noise = np.random.default_rng(seed).random(grid.shape)
    return noise * spec.v0_scale if spec.v0_mode == "scaled_uniform_random" else noise


def build_initial_state(spec: InitialConditionSpec, grid: Grid, seed: int = 0) -> State:
    """Gaussian bacteria/toxin/necrosis bumps on a (seeded) random tissue field."""
    g = lambda amp: _gaussian(grid, amp, spec.gauss_center, spec.gauss_width)  # noqa: E731
    return State(grid, u=g(spec.u0_amp), m=g(spec.m0_amp), v=initial_v(spec, grid, seed),
                 n=g(spec.n0_amp), t=0.0)


# Dimensional haptotactic sensitivities (gamma1, gamma2) per scenario, in hours.
_SCENARIO_GAMMAS = {
    "S1": (1e-5, 1e-5),
    "S2": (1e-3, 1e-5),
    "S3": (1e-5, 1e-3),
    "S4": (1e-5, 1e-5),
    "S5": (1e-5, 1e-5),
}


def scenario_gammas(scenario_id: str) -> tuple[float, float]:
    try:
        return _SCENARIO_GAMMAS[scenario_id]
    except KeyError:
        raise ValueError(f"unknown scenario {scenario_id!r}; expected one of {SCENARIO_IDS}") from None


def scenario_params(
    scenario_id: str, base: DimensionalParams | None = None
) -> tuple[ScenarioSpec, dict[str, float]]:
    """Scenario definition plus the nondimensional sensitivity overrides.

    Sensitivities are ``gamma * eta0``; S4 switches on chemotaxis toward
    mycolactone with the pass-through ``gamma3``; S5 starts from a nearly
    tissue-free domain.
    """
    base = base or DimensionalParams()
    gamma1, gamma2 = scenario_gammas(scenario_id)
    overrides = dict(
        g1_t=gamma1 * base.eta0,
        g2_t=gamma2 * base.eta0,
        g3_t=base.gamma3 if scenario_id == "S4" else 0.0,
    )
    ic = InitialConditionSpec()
    if scenario_id == "S5":
        ic = dataclasses.replace(ic, v0_mode="scaled_uniform_random", v0_scale=1e-4)
    return ScenarioSpec(id=scenario_id, ic=ic, **overrides), overrides


def nondim_for(spec: ScenarioSpec, dim: DimensionalParams) -> NondimParams:
    """Nondimensional coefficients for a scenario: the model's own set with
    the scenario's taxis sensitivities applied."""
    if spec.model is ModelKind.LINEAR:
        p = nondimensionalize_linear(dim)
        return p.replace(g1_t=spec.g1_t, g2_t=spec.g2_t, g3_t=spec.g3_t)
    return nondimensionalize_nonlinear(dim).replace(g3_t=spec.g3_t)


@dataclass
class ScenarioRun:
    spec: ScenarioSpec
    params: NondimParams
    grid: Grid
    states: list[State]
    stats: RunStats


def run_scenario(
    spec: ScenarioSpec,
    dim: DimensionalParams | None = None,
    grid: Grid | None = None,
    cfg: StepperConfig | None = None,
) -> ScenarioRun:
    dim = dim or DimensionalParams()
    grid = grid or Grid()
    cfg = cfg or StepperConfig()
    p = nondim_for(spec, dim)
    initial = build_initial_state(spec.ic, grid, spec.rng_seed)
    stats = RunStats()
    states = run(initial, spec.model, p, cfg, spec.horizon, spec.snapshots, stats)
    return ScenarioRun(spec, p, grid, states, stats)


@dataclass
class StateDiff:
    """Per-field ``b - a`` at one snapshot time, with summaries."""

    t: float
    fields: dict[str, Field]

    @property
    def sup(self) -> dict[str, float]:
        return {k: sup_norm(f) for k, f in self.fields.items()}

    @property
    def integral(self) -> dict[str, float]:
        return {k: integrate(f) for k, f in self.fields.items()}


def compare_runs(a: list[State], b: list[State]) -> list[StateDiff]:
    if len(a) != len(b):
        raise ValueError(f"snapshot count mismatch: {len(a)} vs {len(b)}")
    out = []
    for sa, sb in zip(a, b):
        if abs(sa.t - sb.t) > 1e-9 * max(1.0, abs(sa.t)):
            raise ValueError(f"snapshot times differ: {sa.t} vs {sb.t}")
        out.append(StateDiff(sa.t, {k: diff(sb.field(k), sa.field(k)) for k in FIELD_NAMES}))
    return out
