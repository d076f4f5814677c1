"""Manufactured solutions shared by the discretization and acceptance tests."""

import numpy as np

from buruli.discretization import apply_diffusion, face_coefficients, upwind_taxis_div
from buruli.grid import Grid

PI = np.pi


def l2(grid, e):
    return float(np.sqrt(np.sum(e**2) * grid.hx * grid.hy))


def diffusion_error(n: int) -> float:
    """div(k grad f) for f = cos(pi x) cos(pi y), k = 1 + x y / 2."""
    g = Grid(n, n)
    X, Y = g.mesh()
    f = np.cos(PI * X) * np.cos(PI * Y)
    k = 1 + 0.5 * X * Y
    fx = -PI * np.sin(PI * X) * np.cos(PI * Y)
    fy = -PI * np.cos(PI * X) * np.sin(PI * Y)
    exact = 0.5 * Y * fx + 0.5 * X * fy - 2 * PI**2 * k * f
    num = apply_diffusion(g, f, *face_coefficients(g, k))
    return l2(g, num - exact)


def taxis_error(n: int) -> float:
    """-div(s c grad phi) for c = 1 + x^2 y / 2, phi = cos(pi x) cos(pi y) + x^2 (1-x)^2 ...

    phi has zero normal derivative on the walls so the exact flux obeys the
    no-flux closure.
    """
    g = Grid(n, n)
    X, Y = g.mesh()
    s = 0.8
    c = 1 + 0.5 * X**2 * Y
    cx, cy = X * Y, 0.5 * X**2
    phi = np.cos(PI * X) * np.cos(PI * Y)
    px = -PI * np.sin(PI * X) * np.cos(PI * Y)
    py = -PI * np.cos(PI * X) * np.sin(PI * Y)
    lap = -2 * PI**2 * phi
    exact = -s * (cx * px + cy * py + c * lap)
    num = upwind_taxis_div(g, c, s, phi)
    return l2(g, num - exact)


def observed_orders(errors):
    e = np.asarray(errors)
    return np.log2(e[:-1] / e[1:])
