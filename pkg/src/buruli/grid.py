"""Uniform cell-centred grid on the unit square, scalar fields and states.

Arrays are stored with shape ``(ny, nx)``: row ``j`` holds the cells at
``y_j`` and column ``i`` the cells at ``x_i``, so a row-major flattening walks
along x first.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property

import numpy as np

FIELD_NAMES = ("u", "m", "v", "n")


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    nx: int = 100
    ny: int = 100

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs at least 4 cells per axis, got {self.nx}x{self.ny}")

    @property
    def hx(self) -> float:
        return 1.0 / self.nx

    @property
    def hy(self) -> float:
        return 1.0 / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @cached_property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    @cached_property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates ``(X, Y)``, each of shape ``(ny, nx)``."""
        return np.meshgrid(self.x, self.y, indexing="xy")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def sample(self, func) -> np.ndarray:
        X, Y = self.mesh()
        return np.broadcast_to(np.asarray(func(X, Y), dtype=float), self.shape).copy()


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            values = values.reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains NaN or Inf")
        object.__setattr__(self, "values", values)

    def __add__(self, other: Field) -> Field:
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __mul__(self, scalar: float) -> Field:
        return Field(self.grid, scalar * self.values)

    __rmul__ = __mul__


def _check_same_grid(f: Field, g: Field) -> None:
    if f.grid != g.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid} vs {g.grid}")


def integrate(f: Field) -> float:
    """Midpoint-rule integral over the unit square."""
    return float(f.values.sum() * f.grid.hx * f.grid.hy)


def sup_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def diff(f: Field, g: Field) -> Field:
    """Pointwise ``f - g``."""
    _check_same_grid(f, g)
    return Field(f.grid, f.values - g.values)


@dataclass(frozen=True, eq=False)
class State:
    """Bacteria ``u``, mycolactone ``m``, normal tissue ``v`` and necrotic
    matter ``n`` (all nondimensional) at time ``t``."""

    grid: Grid
    u: np.ndarray
    m: np.ndarray
    v: np.ndarray
    n: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in FIELD_NAMES:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.grid.shape:
                raise GridMismatchError(
                    f"field {name} has shape {arr.shape}, grid expects {self.grid.shape}"
                )
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> State:
        return cls(grid, grid.zeros(), grid.zeros(), grid.zeros(), grid.zeros(), t)

    def field(self, name: str) -> Field:
        return Field(self.grid, getattr(self, name))

    def fields(self) -> dict[str, Field]:
        return {name: self.field(name) for name in FIELD_NAMES}

    def replace(self, **changes) -> State:
        return dataclasses.replace(self, **changes)

    def integrals(self) -> dict[str, float]:
        return {name: integrate(self.field(name)) for name in FIELD_NAMES}

    def sup_norms(self) -> dict[str, float]:
        return {name: sup_norm(self.field(name)) for name in FIELD_NAMES}
