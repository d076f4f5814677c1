"""Finite-volume style operators on the cell-centred grid.

Everything is written in flux form.  Fluxes live on interior faces only:
x-faces have shape ``(ny, nx-1)`` and y-faces ``(ny-1, nx)``; boundary faces
carry no flux at all, which closes the system with zero total normal flux and
makes every operator here exactly conservative.
"""

from __future__ import annotations

import enum

import numpy as np
import scipy.sparse as sp

from . import coefficients as cf
from .grid import Grid, GridMismatchError, State
from .params import NondimParams


class ModelKind(str, enum.Enum):
    LINEAR = "linear"
    NONLINEAR = "nonlinear"


def face_avg_x(f: np.ndarray) -> np.ndarray:
    return 0.5 * (f[:, :-1] + f[:, 1:])


def face_avg_y(f: np.ndarray) -> np.ndarray:
    return 0.5 * (f[:-1, :] + f[1:, :])


def face_coefficients(grid: Grid, kappa):
    """Arithmetic face averages of a cell coefficient.

    A constant is returned as a pair of floats, which broadcast wherever face
    arrays are expected.
    """
    if np.ndim(kappa) == 0:
        k = float(kappa)
        if not k > 0:
            raise ValueError(f"diffusivity must be positive, got {k}")
        return k, k
    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape != grid.shape:
        raise GridMismatchError(f"coefficient shape {kappa.shape} != grid {grid.shape}")
    if np.min(kappa) <= 0:
        raise ValueError("diffusivity must be positive")
    return face_avg_x(kappa), face_avg_y(kappa)


def apply_diffusion(grid: Grid, f: np.ndarray, kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
    """Matrix-free ``div(k grad f)`` with face coefficients ``kx``, ``ky``."""
    out = np.zeros_like(f)
    fx = kx * (f[:, 1:] - f[:, :-1]) * (1.0 / grid.hx**2)
    fy = ky * (f[1:, :] - f[:-1, :]) * (1.0 / grid.hy**2)
    out[:, :-1] += fx
    out[:, 1:] -= fx
    out[:-1, :] += fy
    out[1:, :] -= fy
    return out


def diffusion_matrix(grid: Grid, kappa=1.0) -> sp.csr_matrix:
    """Assembled 5-point operator for ``div(kappa grad .)`` with no-flux closure.

    Unknowns are numbered row-major, ``k = j * nx + i``.  The matrix is
    symmetric with zero row sums.
    """
    kx, ky = face_coefficients(grid, kappa)
    nx, ny = grid.nx, grid.ny
    kx = np.broadcast_to(kx, (ny, nx - 1))
    ky = np.broadcast_to(ky, (ny - 1, nx))
    idx = np.arange(nx * ny).reshape(ny, nx)
    wx = (kx / grid.hx**2).ravel()
    wy = (ky / grid.hy**2).ravel()
    left, right = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    low, high = idx[:-1, :].ravel(), idx[1:, :].ravel()
    rows = np.concatenate([left, right, low, high])
    cols = np.concatenate([right, left, high, low])
    vals = np.concatenate([wx, wx, wy, wy])
    off = sp.coo_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny)).tocsr()
    diag = np.asarray(off.sum(axis=1)).ravel()
    return (off - sp.diags(diag)).tocsr()


def upwind_divergence(grid: Grid, carried: np.ndarray, wx: np.ndarray, wy: np.ndarray) -> np.ndarray:
    """``-div(w * carried)`` with donor-cell face values.

    ``wx``/``wy`` are face velocities on interior faces.  A positive velocity
    takes the carried value from the lower-index cell.  Zero velocity gives
    zero flux whichever donor is chosen.
    """
    fx = (np.maximum(wx, 0.0) * carried[:, :-1] + np.minimum(wx, 0.0) * carried[:, 1:]) / grid.hx
    fy = (np.maximum(wy, 0.0) * carried[:-1, :] + np.minimum(wy, 0.0) * carried[1:, :]) / grid.hy
    out = np.zeros_like(carried)
    out[:, :-1] -= fx
    out[:, 1:] += fx
    out[:-1, :] -= fy
    out[1:, :] += fy
    return out


def upwind_taxis_div(
    grid: Grid,
    carried: np.ndarray,
    sensitivity: tuple[np.ndarray, np.ndarray] | float,
    potential: np.ndarray,
) -> np.ndarray:
    """``-div(s * carried * grad potential)`` with a two-point face gradient."""
    if carried.shape != grid.shape or potential.shape != grid.shape:
        raise GridMismatchError("carried/potential do not match the grid")
    sx, sy = sensitivity if isinstance(sensitivity, tuple) else (sensitivity, sensitivity)
    wx = sx * (potential[:, 1:] - potential[:, :-1]) / grid.hx
    wy = sy * (potential[1:, :] - potential[:-1, :]) / grid.hy
    return upwind_divergence(grid, carried, wx, wy)


def _grad_x(f, h):
    return (f[:, 1:] - f[:, :-1]) / h


def _grad_y(f, h):
    return (f[1:, :] - f[:-1, :]) / h


def taxis_velocity(state: State, model: ModelKind, p: NondimParams) -> tuple[np.ndarray, np.ndarray]:
    """Net taxis drift of bacteria on interior x- and y-faces.

    Coefficients are evaluated at arithmetic face averages of their
    arguments.  All taxis terms are combined before upwinding, so the donor
    cell follows the direction of the total drift.
    """
    g = state.grid
    u, m, v, n = (np.maximum(a, 0.0) for a in (state.u, state.m, state.v, state.n))
    wx = np.zeros((g.ny, g.nx - 1))
    wy = np.zeros((g.ny - 1, g.nx))
    for avg, grad, h, w in ((face_avg_x, _grad_x, g.hx, wx), (face_avg_y, _grad_y, g.hy, wy)):
        vf, nf = avg(v), avg(n)
        if ModelKind(model) is ModelKind.LINEAR:
            if p.g1_t or p.g2_t:
                w += p.Du_t * cf.a_sens(vf, nf) * (p.g1_t * grad(n, h) + p.g2_t * grad(v, h))
        else:
            uf = avg(u)
            w += cf.D_u_nl(uf, vf, p.D_t) * uf * grad(v, h)
            if p.chin_t:
                w += p.chin_t * cf.kappa(uf, nf) * cf.dtau_dn(nf) * grad(n, h)
        if p.g3_t:
            w += p.g3_t * grad(m, h)
    return wx, wy


def advect_all_taxis(state: State, model: ModelKind, p: NondimParams) -> np.ndarray:
    """Sum of all taxis terms of the bacteria equation, ``-div(u * drift)``."""
    wx, wy = taxis_velocity(state, model, p)
    return upwind_divergence(state.grid, state.u, wx, wy)


def bacteria_diffusivity(state: State, model: ModelKind, p: NondimParams):
    """Cell diffusivity of bacteria: a constant for the linear model, the
    density-dependent ``D_u_nl`` for the position-jump model."""
    if ModelKind(model) is ModelKind.LINEAR:
        return p.Du_t
    return cf.D_u_nl(np.maximum(state.u, 0.0), np.maximum(state.v, 0.0), p.D_t)
