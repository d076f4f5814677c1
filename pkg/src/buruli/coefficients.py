"""Closed-form coefficient functions of both models, in nondimensional variables.

All functions accept scalars or numpy arrays and broadcast.  Arguments must
be nonnegative; callers holding slightly negative round-off values should
clip before calling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    pass


def _nonneg(**args):
    for name, value in args.items():
        if np.min(value) < 0:
            raise DomainError(f"{name} must be nonnegative, got min {np.min(value)!r}")


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class ReceptorKinetics:
    """Binding of necrotic matter to bacterial receptors.

    K_ratio is the association/dissociation ratio k+/k-, R_T the total
    receptor count and b the proportionality between occupied receptors and
    the sensed signal tau.
    """

    K_ratio: float = 1.0
    R_T: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        for name in ("K_ratio", "R_T", "b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def a_sens(v, n):
    """Haptotactic sensitivity 1/(1+n+v)^2 of the linear model."""
    _nonneg(v=v, n=n)
    return _out(1.0 / (1.0 + n + v) ** 2)


def receptor_steady(v, n):
    """Steady receptor occupancy y* = (n+v)/(n+v+1)."""
    _nonneg(v=v, n=n)
    s = np.add(n, v)
    return _out(s / (s + 1.0))


def _dystar_ds(v, n):
    # quotient rule on s/(s+1) with s = n + v
    _nonneg(v=v, n=n)
    s = np.add(n, v)
    return ((s + 1.0) * 1.0 - s * 1.0) / (s + 1.0) ** 2


def dystar_dn(v, n):
    """Partial derivative of ``receptor_steady`` in n (ds/dn = 1)."""
    return _out(_dystar_ds(v, n) * 1.0)


def dystar_dv(v, n):
    """Partial derivative of ``receptor_steady`` in v (ds/dv = 1)."""
    return _out(_dystar_ds(v, n) * 1.0)


def growth(u, v, n):
    """Necrosis-gated logistic growth n/(1+n) * u * (1-u-v-n)."""
    _nonneg(u=u, v=v, n=n)
    return _out(n / (1.0 + n) * u * (1.0 - u - v - n))


def D_u_nl(u, v, Dt):
    """Density-dependent diffusivity Dt/(1+uv)^2 of the position-jump model."""
    _nonneg(u=u, v=v)
    if not Dt > 0:
        raise DomainError("Dt must be positive")
    return _out(Dt / (1.0 + u * v) ** 2)


def chi1_nl(u, v, Dt):
    """Coefficient Dt*u^2/(1+uv)^2 multiplying grad v in the bacterial flux."""
    _nonneg(u=u, v=v)
    if not Dt > 0:
        raise DomainError("Dt must be positive")
    return _out(Dt * u * u / (1.0 + u * v) ** 2)


def chi2_nl(u, n, chin):
    """Coefficient chin*u/((1+n)^2 (1+un)) multiplying grad n in the bacterial flux."""
    _nonneg(u=u, n=n)
    if not chin > 0:
        raise DomainError("chin must be positive")
    return _out(chin * u / ((1.0 + n) ** 2 * (1.0 + u * n)))


def kappa(u, n):
    """Damping 1/(1+un) of necrotaxis by bound bacteria-necrotic complexes."""
    _nonneg(u=u, n=n)
    return _out(1.0 / (1.0 + u * n))


def a_jump(u, v):
    """Symmetric jump factor 1/(1+uv) of the lattice walk."""
    _nonneg(u=u, v=v)
    return _out(1.0 / (1.0 + u * v))


def tau(n, rk: ReceptorKinetics = ReceptorKinetics()):
    """Sensed necrotic signal b * R0*, R0* = K R_T n / (1 + K n)."""
    _nonneg(n=n)
    K = rk.K_ratio
    return _out(rk.b * K * rk.R_T * n / (1.0 + K * n))


def dtau_dn(n, rk: ReceptorKinetics = ReceptorKinetics()):
    _nonneg(n=n)
    K = rk.K_ratio
    return _out(rk.b * K * rk.R_T / (1.0 + K * n) ** 2)
