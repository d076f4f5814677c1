"""IMEX time stepping for both Buruli ulcer models.

Diffusion of bacteria and mycolactone is backward Euler; taxis, growth and
the tissue ODEs are forward Euler.  The implicit systems ``(I - dt A) x = b``
are solved exactly by a cosine transform when the diffusivity is constant
(the no-flux 5-point Laplacian is diagonal in the DCT-II basis), and by
conjugate gradients preconditioned with that transform otherwise.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np
import scipy.fft

from . import coefficients as cf
from ._kernels import jacobi_pcg
from .discretization import (
    ModelKind,
    bacteria_diffusivity,
    face_coefficients,
    taxis_velocity,
    upwind_divergence,
)
from .grid import FIELD_NAMES, Grid, State
from .params import NondimParams

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    def __init__(self, msg: str, residual: float):
        super().__init__(f"{msg} (relative residual {residual:.3e})")
        self.residual = residual


class InvariantError(RuntimeError):
    """A state invariant failed during a run."""

    advice = ""

    def __init__(self, kind: str, time: float, field: str, location: tuple[int, ...], value: float):
        where = ", ".join(str(i) for i in location)
        super().__init__(
            f"{kind} violated at t={time:.6g}: {field}[{where}] = {value:.6g}{self.advice}"
        )
        self.kind = kind
        self.time = time
        self.field = field
        self.location = location
        self.value = value

    def as_dict(self) -> dict:
        return dict(kind=self.kind, time=self.time, field=self.field,
                    location=list(self.location), value=self.value)


class StabilityError(InvariantError):
    """A field went negative after a step, the usual sign of too large a dt."""

    advice = "; reduce dt"

    def __init__(self, time: float, field: str, location: tuple[int, ...], value: float):
        super().__init__("nonnegativity", time, field, location, value)


@dataclass(frozen=True)
class StepperConfig:
    dt: float | None = 0.01
    linear_tol: float = 1e-10
    max_linear_iters: int | None = None  # None -> 10 * nx
    cfl_safety: float = 0.5
    negativity_tol: float = 1e-8
    bound_tol: float = 1e-6

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.linear_tol > 0:
            raise ValueError("linear_tol must be positive")
        if self.negativity_tol < 0 or self.bound_tol < 0:
            raise ValueError("tolerances must be nonnegative")

    def replace(self, **changes) -> StepperConfig:
        return dataclasses.replace(self, **changes)


class ImplicitDiffusion:
    """Solver for ``(I - dt div(k grad)) x = b`` with no-flux boundaries."""

    # Jacobi preconditioning while the off-diagonal weight per row stays
    # below this; the cosine-transform preconditioner takes over beyond it.
    JACOBI_LIMIT = 4.0

    def __init__(self, grid: Grid, compiled: bool = True):
        self.grid = grid
        self.compiled = compiled  # compiled Jacobi-CG loop; False runs the numpy loop
        kx = np.arange(grid.nx)
        ky = np.arange(grid.ny)
        ex = -4.0 / grid.hx**2 * np.sin(np.pi * kx / (2 * grid.nx)) ** 2
        ey = -4.0 / grid.hy**2 * np.sin(np.pi * ky / (2 * grid.ny)) ** 2
        self.eig = ey[:, None] + ex[None, :]  # eigenvalues of the unit Laplacian
        self._symbols: dict[float, np.ndarray] = {}

    def _inv_symbol(self, scale: float) -> tuple[np.ndarray, bool]:
        d = self._symbols.get(scale)
        fresh = d is None
        if fresh:
            if len(self._symbols) > 64:
                self._symbols.clear()
            d = 1.0 / (1.0 - scale * self.eig)
            self._symbols[scale] = d
        return d, fresh

    def solve_constant(self, rhs: np.ndarray, k: float, dt: float) -> np.ndarray:
        """Direct solve for a constant diffusivity ``k``."""
        c = scipy.fft.dctn(rhs, type=2, norm="ortho")
        c *= self._inv_symbol(dt * k)[0]
        return scipy.fft.idctn(c, type=2, norm="ortho")

    def _operator(self, kx, ky, dt):
        g = self.grid
        cx = dt * np.broadcast_to(kx, (g.ny, g.nx - 1)) / g.hx**2
        cy = dt * np.broadcast_to(ky, (g.ny - 1, g.nx)) / g.hy**2
        diag = np.ones(g.shape)
        diag[:, :-1] += cx
        diag[:, 1:] += cx
        diag[:-1, :] += cy
        diag[1:, :] += cy

        def op(x):
            out = diag * x
            out[:, :-1] -= cx * x[:, 1:]
            out[:, 1:] -= cx * x[:, :-1]
            out[:-1, :] -= cy * x[1:, :]
            out[1:, :] -= cy * x[:-1, :]
            return out

        return op, diag

    def solve(
        self,
        rhs: np.ndarray,
        kappa,
        dt: float,
        tol: float = 1e-10,
        maxiter: int | None = None,
    ) -> tuple[np.ndarray, int]:
        """Return ``(x, iterations)`` with relative residual at most ``tol``.

        A constant ``kappa`` (scalar or uniform array) is solved directly
        (iterations = 0) and its residual is verified the first time each
        ``dt * kappa`` is seen.  The iterative path conserves
        ``sum(x) = sum(b)`` to round-off.
        """
        bnorm = np.linalg.norm(rhs)
        if bnorm == 0.0:
            return np.zeros_like(rhs), 0
        if np.ndim(kappa) != 0 and np.ptp(kappa) == 0:
            kappa = float(np.asarray(kappa).flat[0])
        kx, ky = face_coefficients(self.grid, kappa)
        if np.ndim(kappa) == 0:
            k = float(kappa)
            fresh = self._inv_symbol(dt * k)[1]
            x = self.solve_constant(rhs, k, dt)
            if fresh:
                op, _ = self._operator(k, k, dt)
                res = np.linalg.norm(rhs - op(x)) / bnorm
                if res > tol:
                    raise SolverError("direct solve missed tolerance", res)
            return x, 0
        return self._pcg(rhs, kx, ky, dt, tol, maxiter or 10 * self.grid.nx, bnorm)

    def _pcg(self, b, kx, ky, dt, tol, maxiter, bnorm):
        op, diag = self._operator(kx, ky, dt)
        jacobi = np.max(diag) - 1.0 < self.JACOBI_LIMIT
        if jacobi and self.compiled:
            g = self.grid
            cx = np.ascontiguousarray(np.broadcast_to(dt * kx / g.hx**2, (g.ny, g.nx - 1)))
            cy = np.ascontiguousarray(np.broadcast_to(dt * ky / g.hy**2, (g.ny - 1, g.nx)))
            x, it, res, ok = jacobi_pcg(b, cx, cy, diag, 0.5 * tol, maxiter)
            if not ok:
                raise SolverError(f"CG did not converge in {maxiter} iterations", res)
            x += (b.sum() - x.sum()) / x.size
            return x, it
        if jacobi:
            inv_diag = 1.0 / diag
            precond = lambda r: r * inv_diag  # noqa: E731
        else:
            kbar = 0.5 * (float(np.mean(kx)) + float(np.mean(ky)))
            precond = lambda r: self.solve_constant(r, kbar, dt)  # noqa: E731
        x = precond(b)
        r = b - op(x)
        z = precond(r)
        p = z.copy()
        rz = np.vdot(r, z)
        it = 0
        # iterate to tol/2: the mass correction below can add at most ||r||
        while np.linalg.norm(r) > 0.5 * tol * bnorm:
            if it >= maxiter:
                raise SolverError(f"CG did not converge in {maxiter} iterations",
                                  np.linalg.norm(r) / bnorm)
            Ap = op(p)
            alpha = rz / np.vdot(p, Ap)
            x += alpha * p
            r -= alpha * Ap
            z = precond(r)
            rz_new = np.vdot(r, z)
            p = z + (rz_new / rz) * p
            rz = rz_new
            it += 1
        # (I - dt A) maps constants to themselves and A has zero column sums, so
        # sum(x) must equal sum(b); remove the residual's share of the total.
        x += (b.sum() - x.sum()) / x.size
        return x, it


@lru_cache(maxsize=16)
def implicit_solver(grid: Grid) -> ImplicitDiffusion:
    return ImplicitDiffusion(grid)


def max_outflow_rate(grid, wx, wy) -> float:
    """Largest total donor-cell outflow rate of any cell, sum |w_out| / h.

    Explicit upwind transport keeps a nonnegative field nonnegative when
    dt times this rate is at most one.  It never exceeds 4 max|w| / h and is
    at least max|w| / h.
    """
    out = np.zeros(grid.shape)
    out[:, :-1] += np.maximum(wx, 0.0) / grid.hx
    out[:, 1:] += np.maximum(-wx, 0.0) / grid.hx
    out[:-1, :] += np.maximum(wy, 0.0) / grid.hy
    out[1:, :] += np.maximum(-wy, 0.0) / grid.hy
    return float(np.max(out))


def _stable_dt_from(grid, wx, wy, p: NondimParams, m: np.ndarray, safety: float) -> float:
    rate = max_outflow_rate(grid, wx, wy)
    dt_adv = 1.0 / rate if rate > 0 else math.inf
    dt_react = 1.0 / (p.lam_t + p.b1_t * float(np.max(m)) + 1.0)
    return safety * min(dt_adv, dt_react)


def stable_dt(state: State, model: ModelKind, p: NondimParams, grid: Grid | None = None,
              cfl_safety: float = 0.5) -> float:
    """Largest time step allowed by the explicit taxis and reaction parts:
    ``cfl_safety * min(1 / max cell outflow rate, 1 / (lam + b1 max m + 1))``."""
    wx, wy = taxis_velocity(state, model, p)
    return _stable_dt_from(grid or state.grid, wx, wy, p, state.m, cfl_safety)


def _advance(state: State, model: ModelKind, p: NondimParams, cfg: StepperConfig, dt: float,
             velocity) -> State:
    grid = state.grid
    solver = implicit_solver(grid)
    u, m, v, n = state.u, state.m, state.v, state.n
    up, vp, np_ = (np.maximum(a, 0.0) for a in (u, v, n))

    taxis = upwind_divergence(grid, u, *velocity)
    u_star = u + dt * (taxis + cf.growth(up, vp, np_))
    tol = cfg.linear_tol
    u_new, _ = solver.solve(u_star, bacteria_diffusivity(state, model, p), dt, tol,
                            cfg.max_linear_iters)

    m_star = m + dt * (p.delta_t * u / (1.0 + u) - p.lam_t * m)
    m_new, _ = solver.solve(m_star, 1.0, dt, tol, cfg.max_linear_iters)

    v_new = v - dt * p.b1_t * m * v
    n_new = n + dt * (p.b2_t * m * v - p.gam_t * n)
    new = State(grid, u_new, m_new, v_new, n_new, state.t + dt)
    _check_negativity(new, cfg.negativity_tol)
    return new


def _check_negativity(state: State, tol: float) -> None:
    for name in FIELD_NAMES:
        a = getattr(state, name)
        k = int(np.argmin(a))
        if a.flat[k] < -tol:
            loc = tuple(int(i) for i in np.unravel_index(k, a.shape))
            raise StabilityError(state.t, name, loc, float(a.flat[k]))


def step(state: State, model: ModelKind, p: NondimParams, cfg: StepperConfig) -> State:
    """Advance one step of size ``cfg.dt`` (no CFL adjustment)."""
    if cfg.dt is None:
        raise ValueError("step() needs an explicit dt")
    velocity = taxis_velocity(state, model, p)
    return _advance(state, model, p, cfg, cfg.dt, velocity)


@dataclass
class RunStats:
    steps: int = 0
    dt_min: float = math.inf
    dt_max: float = 0.0
    max_m: float = 0.0
    min_value: float = math.inf
    m_cap: float = math.inf

    def record(self, dt: float, state: State) -> None:
        self.steps += 1
        self.dt_min = min(self.dt_min, dt)
        self.dt_max = max(self.dt_max, dt)
        self.max_m = max(self.max_m, float(np.max(state.m)))
        self.min_value = min(self.min_value, *(float(np.min(getattr(state, f))) for f in FIELD_NAMES))

    def invariant_report(self, negativity_tol: float) -> list[dict]:
        """Outcome of each run-time invariant over the steps taken so far."""
        return [
            dict(name="nonnegativity", observed=self.min_value, limit=-negativity_tol,
                 passed=bool(self.min_value >= -negativity_tol)),
            dict(name="mycolactone bound", observed=self.max_m, limit=self.m_cap,
                 passed=bool(self.max_m <= self.m_cap)),
        ]


def iter_run(
    initial: State,
    model: ModelKind,
    p: NondimParams,
    cfg: StepperConfig,
    horizon: float,
    snapshot_times=(),
    stats: RunStats | None = None,
) -> Iterator[State]:
    """Integrate to ``horizon``, yielding the state at each snapshot time.

    Steps are shortened to land exactly on each snapshot time.  With no
    snapshot times only the final state is yielded.  Invariants (nonnegativity,
    the mycolactone ceiling) are checked after every step.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    times = [float(t) for t in snapshot_times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("snapshot times must be ascending")
    t0 = initial.t
    if times and (times[0] < t0 or times[-1] > t0 + horizon + 1e-12):
        raise ValueError("snapshot times must lie within [t0, t0 + horizon]")
    if not times:
        times = [t0 + horizon]
    stats = stats if stats is not None else RunStats()

    m_cap = float(np.max(initial.m)) + p.m_ceiling + cfg.bound_tol
    stats.m_cap = m_cap
    state = initial
    for target in times:
        while target - state.t > 1e-12 * max(1.0, abs(target)):
            velocity = taxis_velocity(state, model, p)
            dt_safe = _stable_dt_from(state.grid, *velocity, p, state.m, cfg.cfl_safety)
            dt = dt_safe if cfg.dt is None else min(cfg.dt, dt_safe)
            remaining = target - state.t
            if dt >= remaining * (1.0 - 1e-9):
                dt = remaining
            state = _advance(state, model, p, cfg, dt, velocity)
            if dt == remaining:
                state = state.replace(t=target)
            stats.record(dt, state)
            k = int(np.argmax(state.m))
            if state.m.flat[k] > m_cap:
                loc = tuple(int(i) for i in np.unravel_index(k, state.m.shape))
                raise InvariantError("mycolactone bound", state.t, "m", loc, float(state.m.flat[k]))
        yield state


def run(
    initial: State,
    model: ModelKind,
    p: NondimParams,
    cfg: StepperConfig,
    horizon: float,
    snapshot_times=(),
    stats: RunStats | None = None,
) -> list[State]:
    """List form of :func:`iter_run`."""
    return list(iter_run(initial, model, p, cfg, horizon, snapshot_times, stats))
