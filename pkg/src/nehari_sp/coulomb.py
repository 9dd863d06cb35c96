"""Whole-space Newtonian potential ``phi = 1/|x| * (h u^2)`` on the box and on radial grids.

The 3D convolution is aperiodic: the density is zero-padded to the doubled
box and multiplied by the transform of a sampled ``1/|x|`` table, so no
periodic image charges enter.  The kernel's singular node is not sampled;
it carries the lattice-sum correction of the punctured trapezoidal rule
(``-Z(1/2)`` on the origin and a ``Z(-1/2)`` Laplacian stencil on its six
neighbours, ``Z`` the Epstein zeta function of the cubic lattice), which
makes the quadrature sixth-order for smooth densities.
"""
from __future__ import annotations

import functools
import math

import numpy as np
from scipy import fft

from .fields import (Field3, Grid3, RadialField, _as_values, _same_grid, fft_workers,
                     integrate, lp_norm)

#: Analytic continuation of sum' |j|^-1 over Z^3 (negated).
LATTICE_ZETA_HALF = 2.8372974794806
#: sum' |j|^-4 over Z^3.
LATTICE_ZETA_TWO = 16.532315959761669
#: Coefficient of h^4 * Laplace f(0) in the punctured-rule correction.
_LAPLACE_CORRECTION = LATTICE_ZETA_TWO / (12.0 * math.pi**3)


class CoulombKernel:
    """Fourier multiplier table of ``1/|x|`` on the doubled, zero-padded box."""

    def __init__(self, grid: Grid3):
        self.grid = grid
        n, h = grid.n, grid.spacing
        m = 2 * n
        k = np.arange(m)
        d = np.where(k <= n, k, k - m).astype(float) * h
        dist = np.sqrt(d[:, None, None] ** 2 + d[None, :, None] ** 2 + d[None, None, :] ** 2)
        dist[0, 0, 0] = 1.0
        g = 1.0 / dist
        c1 = _LAPLACE_CORRECTION / h
        g[0, 0, 0] = LATTICE_ZETA_HALF / h - 6 * c1
        for i in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            g[i] += c1
        table = fft.rfftn(g, workers=fft_workers()).real * grid.cell_volume
        table.flags.writeable = False
        self.multiplier = table

    def apply(self, density: np.ndarray) -> np.ndarray:
        n = self.grid.n
        m = 2 * n
        padded = np.zeros((m, m, m))
        padded[:n, :n, :n] = density
        w = fft_workers()
        out = fft.irfftn(fft.rfftn(padded, workers=w) * self.multiplier, s=(m, m, m), workers=w)
        return np.ascontiguousarray(out[:n, :n, :n])


@functools.lru_cache(maxsize=4)
def kernel_for(grid: Grid3) -> CoulombKernel:
    return CoulombKernel(grid)


def _density(u: np.ndarray, h: np.ndarray | None) -> np.ndarray:
    rho = u * u
    if h is not None:
        rho = h * rho
    return rho


def potential_values(u: np.ndarray, grid: Grid3, h: np.ndarray | None = None) -> np.ndarray:
    return kernel_for(grid).apply(_density(u, h))


def coulomb_potential(u: Field3, h_field=None) -> Field3:
    """``phi = 1/|x| * (h u^2)``; ``h_field=None`` means ``h = 1``."""
    h = None if h_field is None else _as_values(h_field, u.grid)
    if h is not None and np.any(h < 0):
        raise ValueError("coulomb weight h must be nonnegative")
    return Field3(u.grid, potential_values(u.values, u.grid, h))


def coulomb_energy(u: Field3, h_field=None) -> float:
    """``int phi_u h u^2`` (four times the Poisson part of the energy)."""
    h = None if h_field is None else _as_values(h_field, u.grid)
    phi = potential_values(u.values, u.grid, h)
    return integrate(phi * _density(u.values, h), u.grid)


def bilinear(f: Field3, g: Field3) -> float:
    """``B(f, g) = int (1/|x| * f) g`` for densities ``f, g``."""
    _same_grid(f, g)
    return integrate(kernel_for(f.grid).apply(f.values) * g.values, f.grid)


def coulomb_bound_check(u: Field3, sobolev: float | None = None) -> tuple[float, float]:
    """Both sides of ``||phi||_{D^{1,2}} <= S^{-1/2} |u|_{12/5}^2``.

    ``phi`` here is the weak solution of ``-Laplace phi = u^2``, i.e.
    ``phi_u / (4 pi)``, whose Dirichlet energy equals ``int phi u^2``.
    """
    if not np.any(u.values):
        raise ValueError("coulomb_bound_check needs a nonzero field")
    if sobolev is None:
        from .bubble import sobolev_constant
        sobolev = sobolev_constant()
    lhs = math.sqrt(coulomb_energy(u) / (4 * math.pi))
    rhs = lp_norm(u, 12.0 / 5.0) ** 2 / math.sqrt(sobolev)
    return lhs, rhs


# ---------------------------------------------------------------- radial

def radial_potential_values(w2: np.ndarray, r: np.ndarray, dr: float) -> np.ndarray:
    """Shell-theorem sums ``phi_i = sum_j m_j / max(r_i, r_j)``, ``m_j = 4 pi dr w_j^2``.

    ``w2`` holds ``(r u)^2`` at the nodes.
    """
    m = 4 * np.pi * dr * w2
    inner = np.cumsum(m)
    outer = np.cumsum((m / r)[::-1])[::-1]
    outer = np.append(outer[1:], 0.0)
    return inner / r + outer


def radial_coulomb(u: RadialField) -> RadialField:
    """Newtonian potential of a radial density ``u^2``:
    ``phi(r) = (4 pi / r) int_0^r s^2 u^2 ds + 4 pi int_r^inf s u^2 ds``."""
    r = u.grid.r
    w = r * u.values
    return RadialField(u.grid, radial_potential_values(w * w, r, u.grid.dr))
