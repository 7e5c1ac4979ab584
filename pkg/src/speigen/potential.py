"""Radial grids, sampled profiles and the spherical Poisson solve.

All integrals use the model convention in which the angular factor 4*pi is
dropped from the enclosed mass, ``M(r) = int_0^r rho(s) s^2 ds``.  The
potential solves ``Laplacian(phi) = rho`` with ``phi -> 0`` at infinity::

    phi(r) = -M(r) / r - int_r^rmax rho(s) s ds
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from .errors import ContractError, DomainError

QUADRATURES = ("trapezoid", "simpson")


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Ordered radii starting at the origin.

    Parameters
    ----------
    r : array_like
        Strictly increasing radii with ``r[0] == 0``.
    """

    r: np.ndarray
    step: float | None = field(default=None)

    def __post_init__(self):
        r = np.ascontiguousarray(self.r, dtype=np.float64)
        if r.ndim != 1 or r.size < 3:
            raise ContractError("grid needs a 1-D array of at least 3 radii")
        if r[0] != 0.0:
            raise ContractError(f"grid must start at r = 0, got {r[0]!r}")
        dr = np.diff(r)
        if not np.all(dr > 0):
            raise ContractError("grid radii must be strictly increasing")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)
        if self.step is None:
            h = dr[0]
            if np.allclose(dr, h, rtol=1e-12, atol=0.0):
                object.__setattr__(self, "step", float(h))

    @classmethod
    def uniform(cls, r_max: float, size: int) -> "RadialGrid":
        """``size`` equally spaced points on ``[0, r_max]``."""
        if size < 3:
            raise ContractError("uniform grid needs at least 3 points")
        h = float(r_max) / (size - 1)
        return cls.from_step(h, size)

    @classmethod
    def from_step(cls, h: float, size: int) -> "RadialGrid":
        """Points ``0, h, 2h, ...`` (exact multiples of the step)."""
        if not h > 0:
            raise DomainError(f"grid step must be positive, got {h!r}")
        return cls(np.arange(size, dtype=np.float64) * h, step=float(h))

    @property
    def size(self) -> int:
        return self.r.size

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def is_uniform(self) -> bool:
        return self.step is not None

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (self.size == other.size and np.array_equal(self.r, other.r))

    def __len__(self):
        return self.size

    def __repr__(self):
        kind = f"step={self.step:.6g}" if self.step else "nonuniform"
        return f"RadialGrid(size={self.size}, r_max={self.r_max:.6g}, {kind})"


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Samples of a radial function on a :class:`RadialGrid`."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.size,):
            raise ContractError(
                f"profile has {v.size} samples but grid has {self.grid.size} points"
            )
        if not np.all(np.isfinite(v)):
            raise ContractError("profile values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def __len__(self):
        return self.values.size


def _check_same_grid(*profiles: RadialProfile) -> RadialGrid:
    grid = profiles[0].grid
    for p in profiles[1:]:
        if not grid.same_as(p.grid):
            raise ContractError("profiles live on different grids; resample explicitly first")
    return grid


def _cumulative(y: np.ndarray, r: np.ndarray, quadrature: str) -> np.ndarray:
    if quadrature == "trapezoid":
        return cumulative_trapezoid(y, r, initial=0.0)
    if quadrature == "simpson":
        return cumulative_simpson(y, x=r, initial=0.0)
    raise ContractError(f"unknown quadrature {quadrature!r}; choose from {QUADRATURES}")


def cumulative_mass(density: RadialProfile, quadrature: str = "trapezoid") -> np.ndarray:
    """Running integral ``M(r_i) = int_0^{r_i} rho s^2 ds`` at every grid point."""
    r = density.r
    return _cumulative(density.values * r * r, r, quadrature)


def enclosed_integral(density: RadialProfile, r: float, quadrature: str = "trapezoid") -> float:
    """Enclosed mass ``int_0^r rho(s) s^2 ds`` (no 4*pi factor).

    Between grid points the cumulative integral is interpolated linearly.
    """
    grid = density.grid
    if not (0.0 <= r <= grid.r_max) or not np.isfinite(r):
        raise DomainError(f"radius {r!r} outside grid range [0, {grid.r_max}]")
    m = cumulative_mass(density, quadrature)
    return float(np.interp(r, grid.r, m))


def poisson_potential(density: RadialProfile, quadrature: str = "trapezoid") -> RadialProfile:
    """Spherical solution of ``Laplacian(phi) = rho`` vanishing at infinity.

    The outer integral is truncated at the grid end, so outside the grid the
    potential continues as the point-mass tail ``-M_tot / r``.  At ``r = 0``
    the term ``M(r)/r`` is replaced by its limit, zero.
    """
    if np.any(density.values < 0):
        raise ContractError("density must be non-negative")
    r = density.r
    rho = density.values
    inner = _cumulative(rho * r * r, r, quadrature)
    outer_c = _cumulative(rho * r, r, quadrature)
    outer = outer_c[-1] - outer_c
    phi = np.empty_like(r)
    phi[1:] = -inner[1:] / r[1:] - outer[1:]
    phi[0] = -outer[0]
    return RadialProfile(density.grid, phi)


def radial_laplacian(profile: RadialProfile) -> np.ndarray:
    """Second-difference radial Laplacian ``(r y)'' / r`` on a uniform grid.

    The end points are returned as NaN since no centred stencil exists there.
    """
    grid = profile.grid
    if not grid.is_uniform:
        raise ContractError("radial_laplacian requires a uniform grid")
    h = grid.step
    r = grid.r
    w = r * profile.values
    lap = np.full_like(w, np.nan)
    lap[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / (h * h * r[1:-1])
    return lap


def l2_mass(f: RadialProfile, quadrature: str = "trapezoid") -> float:
    """Full 3-D norm ``4*pi int f^2 r^2 dr``."""
    r = f.r
    return float(4.0 * np.pi * _cumulative(f.values ** 2 * r * r, r, quadrature)[-1])
