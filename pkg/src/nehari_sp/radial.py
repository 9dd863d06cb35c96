"""Radial discretization of the autonomous problem

    -Lap u + w_P phi_u u + a u = sum_i b_i |u|^{q_i-2} u + b_{m+1} |u|^4 u

in the variable ``w = r u`` on a uniform grid, so the kinetic term becomes the
1D Dirichlet form ``int (w')^2``.  All discrete pieces are exact gradients of
one discrete energy, so the Nehari machinery of :mod:`functional` applies
unchanged.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solveh_banded

from .coulomb import radial_potential_values
from .fields import RadialField, RadialGrid
from .functional import RayPolynomial
from .potentials import Frozen, PotentialError


def check_autonomous(f: Frozen, strict: bool = True) -> None:
    """Parameter constraints ``a > 0``, ``b_{i0} > 0``, ``(j - i0) b_j > 0``.

    With ``strict=False`` zero and pivot-sign violations are tolerated as long
    as some post-pivot term is attractive; that is the form needed when
    coefficients are frozen from general potentials.
    """
    if not f.a > 0:
        raise PotentialError(f"autonomous problem needs a > 0, got {f.a}")
    if f.poisson_weight < 0:
        raise PotentialError("Poisson weight must be nonnegative")
    i0 = f.i0
    if strict:
        if not f.b[i0 - 1] > 0:
            raise PotentialError(f"b_{i0} must be positive, got {f.b[i0 - 1]}")
        for j, bj in enumerate(f.b, 1):
            if j != i0 and not (j - i0) * bj > 0:
                raise PotentialError(f"(j - i0) b_j > 0 violated at j = {j} (b_j = {bj})")
        return
    for j, bj in enumerate(f.b, 1):
        if (j - i0) * bj < 0:
            raise PotentialError(f"sign pattern violated at j = {j} (b_j = {bj})")
    if not f.attractive():
        raise PotentialError("degenerate frozen problem: no attractive term at or after the pivot")


class RadialProblem:
    """Discrete radial functional in ``w = r u``; inner products are ``L^2(R^3)`` ones."""

    def __init__(self, frozen: Frozen, grid: RadialGrid):
        self.f = frozen
        self.grid = grid
        self.q = frozen.q
        self.i0 = frozen.i0
        self.r = grid.r
        self.dr = grid.dr
        self._w4pi = 4 * np.pi * grid.dr
        n = grid.n_r
        ab = np.empty((2, n))
        ab[0, :] = -1.0 / self.dr**2
        ab[1, :] = 2.0 / self.dr**2 + frozen.a
        self._banded = ab

    def potential(self, w: np.ndarray) -> np.ndarray:
        return radial_potential_values(w * w, self.r, self.dr)

    def _kinetic(self, w: np.ndarray) -> float:
        dw = np.diff(w, prepend=0.0, append=0.0)
        return float(4 * np.pi * np.dot(dw, dw) / self.dr)

    def ray(self, w: np.ndarray, phi: np.ndarray | None = None):
        f = self.f
        if phi is None:
            phi = self.potential(w)
        w2 = w * w
        quad = self._kinetic(w) + f.a * self._w4pi * w2.sum()
        poisson = f.poisson_weight * self._w4pi * float(np.dot(w2, phi))
        r2 = self.r * self.r
        au = np.abs(w) / self.r
        sub = tuple(bi * self._w4pi * float(np.dot(r2, au**qi)) for bi, qi in zip(f.b, f.q))
        crit = f.b[-1] * self._w4pi * float(np.dot(r2, au**6))
        return RayPolynomial(quad, poisson, sub, crit, f.q), phi

    def residual(self, w: np.ndarray, phi: np.ndarray) -> np.ndarray:
        f = self.f
        lap = (2 * w - np.append(w[1:], 0.0) - np.insert(w[:-1], 0, 0.0)) / self.dr**2
        au = np.abs(w) / self.r
        coef = f.a + f.poisson_weight * phi
        for bi, qi in zip(f.b, f.q):
            coef = coef - bi * au ** (qi - 2)
        coef = coef - f.b[-1] * au**4
        return lap + coef * w

    def precondition(self, res: np.ndarray, kind: str = "sobolev") -> np.ndarray:
        if kind == "identity":
            return res
        return solveh_banded(self._banded, res, check_finite=False)

    def dot(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(self._w4pi * np.dot(a, b))

    def clip(self, w: np.ndarray) -> np.ndarray:
        return np.maximum(w, 0.0)

    def field(self, w: np.ndarray) -> RadialField:
        return RadialField(self.grid, w / self.r)

    def gaussian(self, width: float) -> np.ndarray:
        return self.r * np.exp(-0.5 * (self.r / width) ** 2)
