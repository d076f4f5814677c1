import math

import numpy as np
import pytest

from buruli import stepper as st_mod
from buruli.discretization import ModelKind, advect_all_taxis, apply_diffusion
from buruli.grid import Grid, State, integrate
from buruli.params import DimensionalParams, NondimParams, nondimensionalize_linear
from buruli.scenarios import build_initial_state, nondim_for, scenario_params
from buruli.stepper import (
    ImplicitDiffusion,
    InvariantError,
    SolverError,
    StabilityError,
    StepperConfig,
    run,
    stable_dt,
    step,
)
from buruli import coefficients as cf

TABLE = nondimensionalize_linear(DimensionalParams())


def uniform(grid, u, m, v, n, t=0.0):
    return State(grid, *(np.full(grid.shape, float(c)) for c in (u, m, v, n)), t=t)


def frozen_run(p, dt, horizon, m0, v0, n0, freeze_v):
    """Step with m (and optionally v) reset to their initial values after every step."""
    g = Grid(4, 4)
    s = uniform(g, 0.0, m0, v0, n0)
    cfg = StepperConfig(dt=dt)
    for _ in range(int(round(horizon / dt))):
        s = step(s, ModelKind.LINEAR, p, cfg)
        s = s.replace(m=np.full(g.shape, m0))
        if freeze_v:
            s = s.replace(v=np.full(g.shape, v0))
    return s


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(dt=0.0), dict(cfl_safety=0.0), dict(cfl_safety=1.5),
                                    dict(bound_tol=-1.0), dict(linear_tol=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            StepperConfig(**kw)


class TestImplicitSolve:
    def test_constant_direct_residual(self, rng):
        g = Grid(16, 12)
        b = rng.random(g.shape)
        x, iters = ImplicitDiffusion(g).solve(b, 0.3, 0.01)
        op, _ = ImplicitDiffusion(g)._operator(0.3, 0.3, 0.01)
        assert iters == 0
        assert np.linalg.norm(op(x) - b) / np.linalg.norm(b) < 1e-12

    @pytest.mark.parametrize("scale", [1e-3, 10.0])
    def test_variable_pcg_residual(self, rng, scale):
        g = Grid(24, 20)
        k = scale * (0.2 + rng.random(g.shape))
        b = rng.random(g.shape)
        x, _ = ImplicitDiffusion(g).solve(b, k, 0.01, tol=1e-10)
        resid = x - 0.01 * apply_diffusion(g, x, 0.5 * (k[:, 1:] + k[:, :-1]),
                                           0.5 * (k[1:] + k[:-1])) - b
        assert np.linalg.norm(resid) / np.linalg.norm(b) <= 1e-10

    def test_compiled_matches_numpy(self, rng):
        g = Grid(30, 26)
        k = 1e-2 * (0.5 + rng.random(g.shape))
        b = rng.random(g.shape)
        fast, _ = ImplicitDiffusion(g, compiled=True).solve(b, k, 0.01, tol=1e-12)
        slow, _ = ImplicitDiffusion(g, compiled=False).solve(b, k, 0.01, tol=1e-12)
        np.testing.assert_allclose(fast, slow, rtol=0, atol=1e-11)
        assert fast.sum() == pytest.approx(b.sum(), rel=1e-13)

    def test_iteration_cap(self, rng):
        g = Grid(24, 24)
        k = 5.0 + rng.random(g.shape)
        with pytest.raises(SolverError) as err:
            ImplicitDiffusion(g).solve(rng.random(g.shape), k, 1.0, tol=1e-14, maxiter=1)
        assert err.value.residual > 1e-14


class TestStepExamples:
    def test_zero_fixed_point(self, small_grid):
        s = step(State.zeros(small_grid), ModelKind.LINEAR, TABLE, StepperConfig())
        for name in "umvn":
            assert np.all(getattr(s, name) == 0)

    def test_tissue_update_exact(self, small_grid):
        dt, m0, v0 = 0.01, 0.002, 0.8
        s = step(uniform(small_grid, 0, m0, v0, 0), ModelKind.LINEAR, TABLE, StepperConfig(dt=dt))
        np.testing.assert_allclose(s.v, v0 - dt * TABLE.b1_t * m0 * v0, rtol=0, atol=1e-15)
        np.testing.assert_allclose(s.n, dt * TABLE.b2_t * m0 * v0, rtol=0, atol=1e-17)

    @pytest.mark.parametrize("model", list(ModelKind))
    def test_uniform_matches_scalar_euler(self, model):
        g = Grid(6, 5)
        p = TABLE.replace(g3_t=1e-4, D_t=0.05, chin_t=0.1)
        u, m, v, n = 0.3, 0.001, 0.6, 0.05
        s = uniform(g, u, m, v, n)
        dt = 0.01
        cfg = StepperConfig(dt=dt)
        for _ in range(200):
            s = step(s, model, p, cfg)
            u, m, v, n = (
                u + dt * cf.growth(u, v, n),
                (m + dt * (p.delta_t * u / (1 + u) - p.lam_t * m)),
                v - dt * p.b1_t * m * v,
                n + dt * (p.b2_t * m * v - p.gam_t * n),
            )
        for name, ref in zip("umvn", (u, m, v, n)):
            assert np.max(np.abs(getattr(s, name) - ref)) <= 1e-12

    def test_negativity_reported(self, small_grid):
        p = TABLE.replace(b1_t=1e4)
        s = uniform(small_grid, 0.0, 0.5, 0.5, 0.0)
        with pytest.raises(StabilityError) as err:
            step(s, ModelKind.LINEAR, p, StepperConfig(dt=0.04))
        e = err.value
        assert e.field == "v" and "reduce dt" in str(e) and len(e.location) == 2


class TestClosedFormOracles:
    horizon = 2.0
    m0, v0, n0 = 0.01, 0.9, 0.02

    def v_error(self, dt):
        s = frozen_run(TABLE, dt, self.horizon, self.m0, self.v0, self.n0, freeze_v=False)
        exact = self.v0 * math.exp(-TABLE.b1_t * self.m0 * self.horizon)
        return float(np.max(np.abs(s.v - exact)))

    def n_error(self, dt):
        s = frozen_run(TABLE, dt, self.horizon, self.m0, self.v0, self.n0, freeze_v=True)
        g, src = TABLE.gam_t, TABLE.b2_t * self.m0 * self.v0
        T = self.horizon
        exact = math.exp(-g * T) * self.n0 + src * (1 - math.exp(-g * T)) / g
        return float(np.max(np.abs(s.n - exact)))

    @pytest.mark.parametrize("which", ["v", "n"])
    def test_first_order(self, which):
        err = getattr(self, f"{which}_error")
        e1, e2 = err(0.04), err(0.01)
        assert e1 / e2 == pytest.approx(4.0, abs=0.5)
        assert e2 < 1e-3


class TestConservation:
    def test_mass_without_reactions(self):
        g = Grid(24, 24)
        rng = np.random.default_rng(7)
        X, Y = g.mesh()
        bump = np.exp(-((X - 0.5) ** 2 + (Y - 0.4) ** 2) / 0.02)
        s = State(g, 0.9 * bump, 0.001 * bump, rng.random(g.shape), g.zeros())
        p = NondimParams(Du_t=1.16e-3, g1_t=1e-2, g2_t=1e-2, g3_t=1e-2)
        cfg = StepperConfig(dt=0.01)
        iu, im = integrate(s.field("u")), integrate(s.field("m"))
        for _ in range(1000):
            s = step(s, ModelKind.LINEAR, p, cfg)
        assert abs(integrate(s.field("u")) - iu) < 1e-10
        assert abs(integrate(s.field("m")) - im) < 1e-10

    def test_nonlinear_mass(self, random_state):
        p = NondimParams(Du_t=1e-3, D_t=5e-3, chin_t=1e-2)
        s = random_state.replace(n=np.zeros(random_state.grid.shape))
        iu = s.u.sum()
        for _ in range(100):
            s = step(s, ModelKind.NONLINEAR, p, StepperConfig(dt=0.01))
        assert abs(s.u.sum() - iu) <= 1e-12 * iu


def explicit_step(s, p, dt):
    g = s.grid
    u = s.u + dt * (apply_diffusion(g, s.u, p.Du_t, p.Du_t)
                    + advect_all_taxis(s, ModelKind.LINEAR, p) + cf.growth(s.u, s.v, s.n))
    m = s.m + dt * (apply_diffusion(g, s.m, 1.0, 1.0) + p.delta_t * s.u / (1 + s.u) - p.lam_t * s.m)
    v = s.v - dt * p.b1_t * s.m * s.v
    n = s.n + dt * (p.b2_t * s.m * s.v - p.gam_t * s.n)
    return State(g, u, m, v, n, s.t + dt)


def test_imex_agrees_with_explicit_to_first_order():
    g = Grid(10, 10)
    X, Y = g.mesh()
    bump = np.exp(-((X - 0.5) ** 2 + (Y - 0.5) ** 2) / 0.05)
    s0 = State(g, 0.9 * bump, 0.001 * bump, 0.5 + 0.2 * np.cos(np.pi * X), 0.1 * bump)
    p = TABLE.replace(g1_t=0.05, g2_t=0.05)
    diffs = []
    for dt in (2e-3, 1e-3, 5e-4):
        a = b = s0
        for _ in range(int(round(0.1 / dt))):
            a = step(a, ModelKind.LINEAR, p, StepperConfig(dt=dt))
            b = explicit_step(b, p, dt)
        diffs.append(max(np.max(np.abs(getattr(a, f) - getattr(b, f))) for f in "umvn"))
    r = np.array(diffs[:-1]) / np.array(diffs[1:])
    assert np.all(np.abs(r - 2.0) < 0.3), diffs


class TestStableDt:
    def test_reaction_bound_without_gradients(self, small_grid):
        s = uniform(small_grid, 0.3, 0.002, 0.5, 0.1)
        expected = 0.5 / (TABLE.lam_t + TABLE.b1_t * 0.002 + 1)
        assert stable_dt(s, ModelKind.LINEAR, TABLE) == pytest.approx(expected)

    def test_unit_drift(self):
        g = Grid(100, 100)
        wx = np.ones((100, 99))
        wy = np.zeros((99, 100))
        p = NondimParams(Du_t=1.0)
        dt = st_mod._stable_dt_from(g, wx, wy, p, g.zeros(), 0.5)
        assert dt <= 0.005

    def test_scenario_one_pinned(self):
        spec, _ = scenario_params("S1")
        s = build_initial_state(spec.ic, Grid(), 0)
        dt = stable_dt(s, ModelKind.LINEAR, nondim_for(spec, DimensionalParams()))
        assert math.isfinite(dt) and dt > 0
        assert dt == pytest.approx(0.023742027769774483, rel=1e-12)


class TestRun:
    @pytest.fixture
    def setup(self):
        spec, _ = scenario_params("S1")
        g = Grid(16, 16)
        return build_initial_state(spec.ic, g, 3), nondim_for(spec, DimensionalParams())

    def test_zero_horizon(self, setup):
        s0, p = setup
        out = run(s0, ModelKind.LINEAR, p, StepperConfig(), 0.0)
        assert len(out) == 1 and out[0] is s0

    def test_lands_on_snapshots(self, setup):
        s0, p = setup
        out = run(s0, ModelKind.LINEAR, p, StepperConfig(dt=0.03), 1.0, (0.25, 0.5, 1.0))
        assert [s.t for s in out] == [0.25, 0.5, 1.0]

    def test_deterministic(self, setup):
        s0, p = setup
        a = run(s0, ModelKind.LINEAR, p, StepperConfig(), 0.5, (0.2, 0.5))
        b = run(s0, ModelKind.LINEAR, p, StepperConfig(), 0.5, (0.2, 0.5))
        for x, y in zip(a, b):
            for f in "umvn":
                assert np.array_equal(getattr(x, f), getattr(y, f))

    def test_bad_snapshots(self, setup):
        s0, p = setup
        with pytest.raises(ValueError):
            run(s0, ModelKind.LINEAR, p, StepperConfig(), 1.0, (0.5, 0.2))
        with pytest.raises(ValueError):
            run(s0, ModelKind.LINEAR, p, StepperConfig(), 1.0, (2.0,))

    def test_stats_and_bound(self, setup):
        s0, p = setup
        stats = st_mod.RunStats()
        run(s0, ModelKind.LINEAR, p, StepperConfig(), 1.0, (), stats)
        assert stats.steps == 100
        assert stats.max_m <= np.max(s0.m) + p.m_ceiling
        assert all(c["passed"] for c in stats.invariant_report(1e-8))

    def test_breach_diagnostics(self, setup, monkeypatch):
        s0, p = setup
        real = st_mod._advance

        def spiking(*args):
            new = real(*args)
            m = new.m.copy()
            m[2, 5] = 1.0
            return new.replace(m=m)

        monkeypatch.setattr(st_mod, "_advance", spiking)
        with pytest.raises(InvariantError) as err:
            run(s0, ModelKind.LINEAR, p, StepperConfig(), 1.0)
        e = err.value
        assert (e.kind, e.field, e.location, e.value) == ("mycolactone bound", "m", (2, 5), 1.0)
        assert e.time == pytest.approx(0.01)
