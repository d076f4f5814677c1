"""Model parameters in physical units and their dimensionless counterparts.

Lengths are in mm, times in hours, densities in cells/mm^2.  The solvers only
ever see :class:`NondimParams`; the dimensional set exists so that run
configurations can be written with the tabulated literature values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field


class ParameterError(ValueError):
    """Raised when a parameter value is outside its admissible range."""

    def __init__(self, name: str, value: float, reason: str):
        super().__init__(f"{name}={value!r}: {reason}")
        self.name = name
        self.value = value


# Fields that must be strictly positive.
_POSITIVE = (
    "D_u", "D_m", "delta", "lambda_decay", "beta1", "beta2", "gamma_n",
    "alpha_u", "eta0", "K_U", "K_V", "K_N", "K_M", "D_jump", "K1",
)


@dataclass(frozen=True)
class DimensionalParams:
    """Parameter set in physical units (defaults: literature table values).

    ``gamma3`` is the chemotactic sensitivity toward mycolactone.  It has no
    reliable unit conversion, so it is carried as an already dimensionless
    number and passed straight through to ``NondimParams.g3_t``.

    ``D_jump`` and ``K1`` only enter the position-jump model and have no
    tabulated values.  The defaults reuse the bacterial diffusivity,
    ``D_jump = D_u``, and take ``K1 = D_jump * b * K * R_T`` with unit receptor
    constants.
    """

    D_u: float = 1e-4  # mm^2/h
    D_m: float = 0.086  # mm^2/h
    delta: float = 1.0  # 1/h
    lambda_decay: float = 0.1  # 1/h
    beta1: float = 0.3  # 1/h
    beta2: float = 0.3  # 1/h
    gamma_n: float = 3e-4  # 1/h
    alpha_u: float = 0.005  # 1/h
    gamma1: float = 1e-5  # h
    gamma2: float = 1e-5  # h
    gamma3: float = 1e-4  # dimensionless, see class docstring
    eta0: float = 10.0  # 1/h
    K_U: float = 1e4  # cells/mm^2
    K_V: float = 1e4
    K_N: float = 1e4
    K_M: float = 1e4  # mol/L
    D_jump: float = 1e-4  # mm^2/h
    K1: float = 1e-4  # mm^2/h
    gamma_range: tuple[float, float] = field(default=(0.0, 1.0))

    def __post_init__(self):
        for name in _POSITIVE:
            value = getattr(self, name)
            if not value > 0:
                raise ParameterError(name, value, "must be strictly positive")
        lo, hi = self.gamma_range
        for name in ("gamma1", "gamma2"):
            value = getattr(self, name)
            if not lo <= value <= hi:
                raise ParameterError(name, value, f"outside admissible range [{lo}, {hi}]")
        if not self.gamma3 >= 0:
            raise ParameterError("gamma3", self.gamma3, "must be nonnegative")

    def replace(self, **changes) -> DimensionalParams:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class NondimParams:
    """Dimensionless coefficients of the two PDE systems.

    Linear-motility model: ``Du_t, g1_t, g2_t, g3_t``.  Position-jump model:
    ``D_t, chin_t``.  Both share the reaction coefficients.

    Zero reaction coefficients are allowed so that transport can be tested in
    isolation; ``nondimensionalize_*`` always produce strictly positive ones.
    """

    Du_t: float
    g1_t: float = 0.0
    g2_t: float = 0.0
    g3_t: float = 0.0
    delta_t: float = 0.0
    lam_t: float = 0.0
    b1_t: float = 0.0
    b2_t: float = 0.0
    gam_t: float = 0.0
    D_t: float = 0.0
    chin_t: float = 0.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not value >= 0:
                raise ParameterError(f.name, value, "must be nonnegative")
        if not self.Du_t > 0:
            raise ParameterError("Du_t", self.Du_t, "must be strictly positive")

    def replace(self, **changes) -> NondimParams:
        return dataclasses.replace(self, **changes)

    @property
    def m_ceiling(self) -> float:
        """Equilibrium bound delta/lambda for the mycolactone source."""
        return self.delta_t / self.lam_t if self.lam_t > 0 else float("inf")


def _reaction_coefficients(p: DimensionalParams) -> dict[str, float]:
    a = p.alpha_u
    return dict(
        delta_t=p.delta / (p.K_M * a),
        lam_t=p.lambda_decay / a,
        b1_t=p.beta1 / a,
        b2_t=p.beta2 / (p.K_N * a),
        gam_t=p.gamma_n / a,
    )


def nondimensionalize_linear(p: DimensionalParams) -> NondimParams:
    """Coefficients for the linear-motility (haptotaxis) system.

    Space is scaled by sqrt(alpha_u / D_m) and time by alpha_u, so
    diffusivities are measured in units of D_m and rates in units of alpha_u.
    """
    return NondimParams(
        Du_t=p.D_u / p.D_m,
        g1_t=p.gamma1 * p.eta0,
        g2_t=p.gamma2 * p.eta0,
        g3_t=p.gamma3,
        **_reaction_coefficients(p),
    )


def nondimensionalize_nonlinear(p: DimensionalParams) -> NondimParams:
    """Coefficients for the position-jump (density-dependent motility) system.

    The haptotactic sensitivities of the linear model do not appear in this
    system and are left at zero.
    """
    return NondimParams(
        Du_t=p.D_u / p.D_m,
        D_t=p.D_jump / (2.0 * p.D_m),
        chin_t=p.K1 / p.D_m,
        **_reaction_coefficients(p),
    )
