"""1D position-jump lattice and its convergence to the continuum limit.

The occupation density on a lattice of spacing ``h`` evolves by the master
equation

    u_i <- u_i + dt * (T+_{i-1} u_{i-1} + T-_{i+1} u_{i+1} - (T+_i + T-_i) u_i)

with jump rates ``T+-_i = lam * (a(u_i, v_i) + kappa(u_i, n_i) (tau(n_{i+-1}) - tau(n_i)))``.
As ``h -> 0`` with ``2 lam h^2 = D`` this tends to

    u_t = (D/2) (a(u, v) u)_xx - D (kappa(u, n) u tau'(n) n_x)_x,

which is the bacteria equation of the position-jump PDE model.  Nodes sit at
cell centres of (0, 1) and the walls reflect: a jump that would leave the
lattice is turned into a rest, so total mass is conserved exactly.  Tissue
profiles ``v`` and ``n`` are frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import coefficients as cf
from .coefficients import ReceptorKinetics
from .discretization import face_avg_x, upwind_divergence
from .grid import Grid
from .stepper import implicit_solver

BOUNDARY = "reflecting"

Profile = Callable[[np.ndarray], np.ndarray]


class LatticeStabilityError(RuntimeError):
    """Negative jump rate or ``dt * (T+ + T-) >= 1``."""


@dataclass(frozen=True, eq=False)
class LatticeConfig:
    num_nodes: int
    h: float
    jump_rate: float
    dt: float
    frozen_v: np.ndarray
    frozen_n: np.ndarray
    rk: ReceptorKinetics = field(default_factory=ReceptorKinetics)
    diffusivity: float | None = None

    def __post_init__(self):
        for name in ("frozen_v", "frozen_n"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.num_nodes,):
                raise ValueError(f"{name} must have one value per node")
            if np.min(arr) < 0:
                raise ValueError(f"{name} must be nonnegative")
            object.__setattr__(self, name, arr)
        if self.num_nodes < 3:
            raise ValueError("need at least 3 nodes")
        if self.diffusivity is not None:
            target = 2.0 * self.jump_rate * self.h**2
            if abs(target - self.diffusivity) > 1e-12 * max(1.0, self.diffusivity):
                raise ValueError(f"2*jump_rate*h^2 = {target} does not match D = {self.diffusivity}")
        bound = self.jump_rate * max_rate_factor(self.frozen_n, self.rk)
        if not 0 < self.dt * bound < 1:
            raise ValueError(
                f"dt={self.dt} violates dt * max(T+ + T-) < 1 (rate bound {bound:.4g})"
            )

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.num_nodes) + 0.5) * self.h

    @classmethod
    def for_limit(
        cls,
        num_nodes: int,
        D: float,
        v: Profile,
        n: Profile,
        rk: ReceptorKinetics | None = None,
        courant: float = 0.5,
    ) -> LatticeConfig:
        """Lattice on (0, 1) with ``2 lam h^2 = D`` and a stable time step."""
        rk = rk or ReceptorKinetics()
        h = 1.0 / num_nodes
        x = (np.arange(num_nodes) + 0.5) * h
        v_nodes = np.asarray(v(x), dtype=float) * np.ones(num_nodes)
        n_nodes = np.asarray(n(x), dtype=float) * np.ones(num_nodes)
        lam = D / (2.0 * h * h)
        dt = courant / (lam * max_rate_factor(n_nodes, rk))
        return cls(num_nodes, h, lam, dt, v_nodes, n_nodes, rk, D)


def max_rate_factor(n: np.ndarray, rk: ReceptorKinetics) -> float:
    """Upper bound of ``(T+ + T-) / lam`` over all densities (a, kappa <= 1)."""
    t = cf.tau(np.asarray(n, dtype=float), rk)
    dt_ = np.abs(np.diff(t))
    pad = np.zeros(len(t) + 1)
    pad[1:-1] = dt_
    return float(np.max(2.0 + pad[:-1] + pad[1:]))


def _rates(u: np.ndarray, cfg: LatticeConfig) -> tuple[np.ndarray, np.ndarray]:
    up = np.maximum(u, 0.0)
    t = cf.tau(cfg.frozen_n, cfg.rk)
    base = cf.a_jump(up, cfg.frozen_v)
    k = cf.kappa(up, cfg.frozen_n)
    tp = np.zeros_like(u)
    tm = np.zeros_like(u)
    tp[:-1] = cfg.jump_rate * (base[:-1] + k[:-1] * (t[1:] - t[:-1]))
    tm[1:] = cfg.jump_rate * (base[1:] + k[1:] * (t[:-1] - t[1:]))
    return tp, tm


def jump_probabilities(i: int, u, v, n, cfg: LatticeConfig) -> tuple[float, float]:
    """Jump rates ``(T+, T-)`` out of interior node ``i``.

    ``u``, ``v``, ``n`` are node vectors; ``cfg`` supplies the jump rate and
    receptor kinetics.  Boundary nodes are handled by the reflecting closure
    inside :func:`master_step` and are rejected here.
    """
    if not 0 < i < len(u) - 1:
        raise ValueError(f"node {i} is a boundary node; only interior nodes have two neighbours")
    ui, vi, ni = float(u[i]), float(v[i]), float(n[i])
    if min(ui, vi, ni) < 0:
        raise ValueError("fields must be nonnegative")
    t = lambda x: cf.tau(float(x), cfg.rk)  # noqa: E731
    base = cf.a_jump(ui, vi)
    k = cf.kappa(ui, ni)
    lam = cfg.jump_rate
    return lam * (base + k * (t(n[i + 1]) - t(ni))), lam * (base + k * (t(n[i - 1]) - t(ni)))


def master_step(u: np.ndarray, cfg: LatticeConfig) -> np.ndarray:
    tp, tm = _rates(u, cfg)
    if np.min(tp) < 0 or np.min(tm) < 0:
        raise LatticeStabilityError("negative jump rate; refine the lattice or smooth n")
    out_rate = cfg.dt * (tp + tm)
    if np.max(out_rate) >= 1:
        raise LatticeStabilityError(f"dt * (T+ + T-) reached {np.max(out_rate):.4g} >= 1")
    new = u - out_rate * u
    new[1:] += cfg.dt * tp[:-1] * u[:-1]
    new[:-1] += cfg.dt * tm[1:] * u[1:]
    return new


def evolve(u0: np.ndarray, cfg: LatticeConfig, t_final: float) -> np.ndarray:
    """Iterate the master equation to ``t_final`` (last step shortened)."""
    u = np.array(u0, dtype=float)
    steps = int(math.floor(t_final / cfg.dt + 1e-9))
    for _ in range(steps):
        u = master_step(u, cfg)
    rest = t_final - steps * cfg.dt
    if rest > 1e-14 * max(1.0, t_final):
        u = master_step(u, _with_dt(cfg, rest))
    return u


def _with_dt(cfg: LatticeConfig, dt: float) -> LatticeConfig:
    return LatticeConfig(cfg.num_nodes, cfg.h, cfg.jump_rate, dt, cfg.frozen_v, cfg.frozen_n,
                         cfg.rk, cfg.diffusivity)


# -- continuum reference -----------------------------------------------------


def limit_pde_solution(
    u0: Profile,
    v: Profile,
    n: Profile,
    D: float,
    t_final: float,
    cells: int,
    rk: ReceptorKinetics | None = None,
    courant: float = 0.25,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the 1D limit equation with the 2D IMEX machinery on an
    ``cells x 4`` grid holding y-independent data.

    Diffusion ``D/2 / (1+uv)^2`` is implicit with lagged coefficients; the
    ``grad v`` and ``grad n`` drifts are explicit first-order upwind.
    Returns ``(x, u)`` at cell centres.
    """
    rk = rk or ReceptorKinetics()
    grid = Grid(cells, 4)
    x = grid.x
    row = lambda f: np.tile(np.asarray(f(x), dtype=float) * np.ones(cells), (grid.ny, 1))  # noqa: E731
    u, vv, nn = row(u0), row(v), row(n)
    solver = implicit_solver(grid)
    vf, nf = face_avg_x(vv), face_avg_x(nn)
    gv = (vv[:, 1:] - vv[:, :-1]) / grid.hx
    gn = (nn[:, 1:] - nn[:, :-1]) / grid.hx
    dtau = cf.dtau_dn(nf, rk)
    zero_y = np.zeros((grid.ny - 1, grid.nx))
    w_bound = D * (float(np.max(np.abs(gv))) + float(np.max(np.abs(gn * dtau)))) + 1e-300
    dt_max = courant * grid.hx / w_bound
    steps = max(1, int(math.ceil(t_final / dt_max)))
    dt = t_final / steps
    for _ in range(steps):
        up = np.maximum(u, 0.0)
        uf = face_avg_x(up)
        wx = 0.5 * D * uf / (1.0 + uf * vf) ** 2 * gv + D * cf.kappa(uf, nf) * dtau * gn
        rhs = u + dt * upwind_divergence(grid, u, wx, zero_y)
        u, _ = solver.solve(rhs, cf.D_u_nl(up, vv, 0.5 * D), dt, tol=1e-12, maxiter=10_000)
    return x, u.mean(axis=0)


def richardson_reference(u0, v, n, D, t_final, cells, rk=None):
    """First-order reference on ``cells`` and ``2*cells``, extrapolated to
    remove the leading O(h) error.  Returned on the coarse cell centres."""
    xc, uc = limit_pde_solution(u0, v, n, D, t_final, cells, rk)
    xf, uf = limit_pde_solution(u0, v, n, D, t_final, 2 * cells, rk)
    return xc, 2.0 * np.interp(xc, xf, uf) - uc


def _second_difference_peak(f: Profile, nodes: int) -> float:
    h = 1.0 / nodes
    x = (np.arange(nodes) + 0.5) * h
    y = np.asarray(f(x), dtype=float) * np.ones(nodes)
    return float(np.max(np.abs(y[2:] - 2 * y[1:-1] + y[:-2]))) / h**2


def check_smooth(f: Profile, nodes: int, name: str = "profile") -> None:
    """Reject profiles whose discrete curvature grows under refinement
    (kinks grow like 1/h, jumps like 1/h^2)."""
    c1 = _second_difference_peak(f, nodes)
    c2 = _second_difference_peak(f, 4 * nodes)
    if c2 > 2.0 * c1 + 1e-9:
        raise ValueError(f"{name} is not smooth (curvature grows {c2 / max(c1, 1e-300):.1f}x)")


@dataclass
class ErrorRow:
    nodes: int
    h: float
    jump_rate: float
    dt: float
    l2_error: float
    ratio: float | None  # previous error / this error


def _error_table(hs_nodes, errors, cfgs) -> list[ErrorRow]:
    rows = []
    for k, (nodes, err, cfg) in enumerate(zip(hs_nodes, errors, cfgs)):
        ratio = errors[k - 1] / err if k > 0 and err > 0 else None
        rows.append(ErrorRow(nodes, cfg.h, cfg.jump_rate, cfg.dt, err, ratio))
    return rows


def convergence_study(
    u0: Profile,
    v: Profile,
    n: Profile,
    node_counts=(16, 32, 64),
    D: float = 1.0,
    t_final: float = 0.02,
    ref_cells: int = 2048,
    rk: ReceptorKinetics | None = None,
) -> list[ErrorRow]:
    """L2 distance between the lattice density and the continuum limit.

    ``2 lam h^2 = D`` is held fixed while ``h = 1/nodes`` shrinks.  The
    lattice density is compared pointwise (it lives on the same volume
    fraction scale as the PDE) against a Richardson-extrapolated
    fine-grid solution interpolated to the lattice nodes.
    """
    rk = rk or ReceptorKinetics()
    finest = max(node_counts)
    check_smooth(v, finest, "v")
    check_smooth(n, finest, "n")
    xr, ur = richardson_reference(u0, v, n, D, t_final, ref_cells, rk)
    errors, cfgs = [], []
    for nodes in node_counts:
        cfg = LatticeConfig.for_limit(nodes, D, v, n, rk)
        u = evolve(np.asarray(u0(cfg.x), dtype=float) * np.ones(nodes), cfg, t_final)
        ref = np.interp(cfg.x, xr, ur)
        errors.append(math.sqrt(cfg.h * float(np.sum((u - ref) ** 2))))
        cfgs.append(cfg)
    return _error_table(node_counts, errors, cfgs)


def heat_kernel(x: np.ndarray, t: float, D: float, center: float = 0.5, width: float = 0.05,
                images: int = 6) -> np.ndarray:
    """Solution of ``u_t = (D/2) u_xx`` on (0, 1) with reflecting walls, for a
    Gaussian start of standard deviation ``width`` (method of images)."""
    var = width**2 + D * t
    out = np.zeros_like(np.asarray(x, dtype=float))
    for k in range(-images, images + 1):
        for c in (center + 2 * k, -center + 2 * k):
            out += np.exp(-((x - c) ** 2) / (2 * var))
    return out / math.sqrt(2 * math.pi * var)


def heat_kernel_study(node_counts=(16, 32, 64, 128), D: float = 1.0, t_final: float = 0.01,
                      width: float = 0.05) -> list[ErrorRow]:
    """Pure symmetric walk (no tissue, flat necrosis) against the exact
    reflected heat kernel."""
    errors, cfgs = [], []
    for nodes in node_counts:
        cfg = LatticeConfig.for_limit(nodes, D, lambda x: 0.0 * x, lambda x: 0.0 * x)
        u0 = heat_kernel(cfg.x, 0.0, D, width=width)
        u = evolve(u0, cfg, t_final)
        exact = heat_kernel(cfg.x, t_final, D, width=width)
        errors.append(math.sqrt(cfg.h * float(np.sum((u - exact) ** 2))))
        cfgs.append(cfg)
    return _error_table(node_counts, errors, cfgs)
