"""Compiled inner loops for the hot paths of the implicit solve.

Each kernel has a plain numpy counterpart in :mod:`buruli.stepper`; the two
are cross-checked in the tests.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _apply(x, cx, cy, diag, out):
    ny, nx = x.shape
    s = 0.0
    for j in range(ny):
        for i in range(nx):
            v = diag[j, i] * x[j, i]
            if i > 0:
                v -= cx[j, i - 1] * x[j, i - 1]
            if i < nx - 1:
                v -= cx[j, i] * x[j, i + 1]
            if j > 0:
                v -= cy[j - 1, i] * x[j - 1, i]
            if j < ny - 1:
                v -= cy[j, i] * x[j + 1, i]
            out[j, i] = v
            s += x[j, i] * v
    return s


@njit(cache=True)
def jacobi_pcg(b, cx, cy, diag, tol, maxiter):
    """Jacobi-preconditioned CG for the 5-point system ``op(x) = b``.

    ``cx``/``cy`` are the off-diagonal face weights and ``diag`` the
    diagonal.  Stops when ``||r|| <= tol * ||b||``.  Returns
    ``(x, iterations, relative residual, converged)``.
    """
    ny, nx = b.shape
    inv = 1.0 / diag
    x = b * inv
    ap = np.empty_like(b)
    _apply(x, cx, cy, diag, ap)
    r = b - ap
    z = r * inv
    p = z.copy()
    rz = 0.0
    rr = 0.0
    bb = 0.0
    for j in range(ny):
        for i in range(nx):
            rz += r[j, i] * z[j, i]
            rr += r[j, i] * r[j, i]
            bb += b[j, i] * b[j, i]
    limit = tol * tol * bb
    it = 0
    while rr > limit:
        if it >= maxiter:
            return x, it, np.sqrt(rr / bb), False
        pap = _apply(p, cx, cy, diag, ap)
        alpha = rz / pap
        rz_new = 0.0
        rr = 0.0
        for j in range(ny):
            for i in range(nx):
                x[j, i] += alpha * p[j, i]
                r[j, i] -= alpha * ap[j, i]
                z[j, i] = r[j, i] * inv[j, i]
                rz_new += r[j, i] * z[j, i]
                rr += r[j, i] * r[j, i]
        beta = rz_new / rz
        rz = rz_new
        for j in range(ny):
            for i in range(nx):
                p[j, i] = z[j, i] + beta * p[j, i]
        it += 1
    return x, it, np.sqrt(rr / bb), True
