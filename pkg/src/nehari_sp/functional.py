"""The energy functional, its Euler-Lagrange residual and the Nehari projection.

For the rescaled equation

    -Lap u + h phi u + V(eps x) u = sum_i Q_i(eps x) |u|^{q_i-2} u + K(eps x) |u|^4 u

the energy restricted to a ray ``t -> t u`` is a generalized polynomial in
``t`` whose coefficients are the five integrals collected in
:class:`RayPolynomial`.  Everything about the Nehari manifold (projection,
residual, ray maximum) is computed from those coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import coulomb
from .fields import (Field3, Grid3, gradient_sq_integral, integrate, neg_laplacian,
                     solve_shifted_laplacian)
from .potentials import Coefficients, PotentialError, PotentialSet

T_LOWER = 1e-6
T_CAP = 1e6


class NehariDegenerateError(ValueError):
    """The ray never crosses the Nehari manifold (no attractive term sees ``u``)."""


@dataclass(frozen=True)
class RayPolynomial:
    """Integrals of ``u`` that determine ``t -> I(t u)``.

    quadratic = ||u||^2, poisson = int phi h u^2, sub[i] = int Q_i |u|^{q_i},
    crit = int K u^6.
    """

    quadratic: float
    poisson: float
    sub: tuple[float, ...]
    crit: float
    q: tuple[float, ...]

    def energy(self, t: float = 1.0) -> float:
        e = 0.5 * t * t * self.quadratic + 0.25 * t**4 * self.poisson
        e -= sum(t**qi * c / qi for qi, c in zip(self.q, self.sub))
        return e - t**6 * self.crit / 6.0

    def nehari(self, t: float) -> float:
        """``f(t) - ||u||^2`` with ``f(t) = -t^2 P + sum t^{q_i-2} C_i + t^4 D``."""
        f = -t * t * self.poisson + sum(t ** (qi - 2) * c for qi, c in zip(self.q, self.sub))
        return f + t**4 * self.crit - self.quadratic

    def dnehari(self, t: float) -> float:
        d = -2 * t * self.poisson + sum((qi - 2) * t ** (qi - 3) * c
                                        for qi, c in zip(self.q, self.sub))
        return d + 4 * t**3 * self.crit

    def residual(self, t: float = 1.0) -> float:
        """``|<I'(tu), tu>| / ||tu||^2``."""
        return abs(self.nehari(t)) / self.quadratic

    def scaled(self, t: float) -> "RayPolynomial":
        """Coefficients of ``t u``."""
        return RayPolynomial(
            t * t * self.quadratic, t**4 * self.poisson,
            tuple(t**qi * c for qi, c in zip(self.q, self.sub)), t**6 * self.crit, self.q)

    def _bracket(self) -> tuple[float, float]:
        if not self.quadratic > 0:
            raise NehariDegenerateError("zero field has no Nehari projection")
        lo, hi = T_LOWER, 1.0
        while self.nehari(lo) >= 0:
            lo *= 1e-3
            if lo < 1e-30:
                raise NehariDegenerateError("no sign change near t = 0")
        while self.nehari(hi) <= 0:
            lo, hi = hi, 2 * hi
            if hi > T_CAP:
                raise NehariDegenerateError(
                    "no attractive term balances ||u||^2 along the ray (t > 1e6)")
        return lo, hi

    def project(self, method: str = "newton") -> float:
        """Unique ``t > 0`` with ``t u`` on the Nehari manifold."""
        lo, hi = self._bracket()
        if method == "bisection":
            while hi - lo > 4e-16 * hi:
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if self.nehari(mid) > 0:
                    hi = mid
                else:
                    lo = mid
            return 0.5 * (lo + hi)
        if method != "newton":
            raise ValueError(f"unknown projection method {method!r}")
        t = hi
        for _ in range(200):
            g = self.nehari(t)
            if g == 0:
                return t
            if g > 0:
                hi = t
            else:
                lo = t
            dg = self.dnehari(t)
            step = g / dg if dg > 0 else math.inf
            t_new = t - step
            if not lo < t_new < hi:
                t_new = 0.5 * (lo + hi)
            if abs(t_new - t) <= 1e-15 * t_new or hi - lo <= 4e-16 * hi:
                return t_new
            t = t_new
        return t


@dataclass(frozen=True)
class EnergyBreakdown:
    quadratic: float
    poisson: float
    subcritical: tuple[float, ...]
    critical: float

    @property
    def total(self) -> float:
        return self.quadratic + self.poisson + sum(self.subcritical) + self.critical

    @classmethod
    def from_ray(cls, ray: RayPolynomial) -> "EnergyBreakdown":
        return cls(0.5 * ray.quadratic, 0.25 * ray.poisson,
                   tuple(-c / qi for qi, c in zip(ray.q, ray.sub)), -ray.crit / 6.0)

    def as_dict(self) -> dict:
        return {"quadratic": self.quadratic, "poisson": self.poisson,
                "subcritical": list(self.subcritical), "critical": self.critical,
                "total": self.total}


@dataclass(frozen=True)
class NehariPoint:
    t: float
    nehari_residual: float


# ---------------------------------------------------------------- grid problem

def _signed_power(u: np.ndarray, p: float) -> np.ndarray:
    """``|u|^{p-1} u``."""
    if p == 2:
        return u
    return np.abs(u) ** (p - 2) * u


class GridProblem:
    """The rescaled functional on a :class:`Grid3` with sampled coefficients."""

    def __init__(self, grid: Grid3, coeffs: Coefficients):
        self.grid = grid
        self.c = coeffs
        self.q = coeffs.q
        self.i0 = coeffs.i0

    @classmethod
    def build(cls, P: PotentialSet, grid: Grid3, eps: float, shift=(0.0, 0.0, 0.0)):
        if not eps > 0:
            raise ValueError(f"eps must be positive, got {eps}")
        return cls(grid, P.on_grid(grid, eps, shift))

    def potential(self, u: np.ndarray) -> np.ndarray:
        return coulomb.potential_values(u, self.grid, self.c.h)

    def ray(self, u: np.ndarray, phi: np.ndarray | None = None) -> tuple[RayPolynomial, np.ndarray]:
        g, c = self.grid, self.c
        if phi is None:
            phi = self.potential(u)
        u2 = u * u
        quad = gradient_sq_integral(u, g) + integrate(c.V * u2, g)
        rho = u2 if c.h is None else c.h * u2
        poisson = integrate(phi * rho, g)
        au = np.abs(u)
        sub = tuple(integrate(Qi * au**qi, g) for Qi, qi in zip(c.Q, c.q))
        crit = integrate(c.K * u2 * u2 * u2, g)
        return RayPolynomial(quad, poisson, sub, crit, c.q), phi

    def residual(self, u: np.ndarray, phi: np.ndarray) -> np.ndarray:
        c = self.c
        hphi = phi if c.h is None else c.h * phi
        r = neg_laplacian(u, self.grid) + (hphi + c.V) * u
        for Qi, qi in zip(c.Q, c.q):
            r -= Qi * _signed_power(u, qi)
        u2 = u * u
        r -= c.K * u2 * u2 * u
        return r

    def precondition(self, r: np.ndarray, kind: str = "sobolev") -> np.ndarray:
        if kind == "identity":
            return r
        return solve_shifted_laplacian(r, self.grid, self.c.V_mean)

    def dot(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.vdot(a, b) * self.grid.cell_volume)

    def clip(self, u: np.ndarray) -> np.ndarray:
        return np.maximum(u, 0.0)

    def field(self, u: np.ndarray) -> Field3:
        return Field3(self.grid, u)


# ---------------------------------------------------------------- public operations

def _problem(u: Field3, P: PotentialSet, eps: float) -> GridProblem:
    return GridProblem.build(P, u.grid, eps)


def energy(u: Field3, P: PotentialSet, eps: float) -> EnergyBreakdown:
    """Energy split into its quadratic, Poisson, subcritical and critical parts."""
    ray, _ = _problem(u, P, eps).ray(u.values)
    return EnergyBreakdown.from_ray(ray)


def residual(u: Field3, P: PotentialSet, eps: float) -> Field3:
    """Euler-Lagrange defect (the L^2 gradient of the energy)."""
    prob = _problem(u, P, eps)
    return Field3(u.grid, prob.residual(u.values, prob.potential(u.values)))


def ray_polynomial(u: Field3, P: PotentialSet, eps: float) -> RayPolynomial:
    return _problem(u, P, eps).ray(u.values)[0]


def nehari_scalar(u: Field3, P: PotentialSet, eps: float, t: float) -> float:
    """``f(t) - ||u||_eps^2``; its root is the Nehari scaling of ``u``."""
    if not np.any(u.values):
        raise ValueError("nehari_scalar needs a nonzero field")
    return ray_polynomial(u, P, eps).nehari(t)


def nehari_project(u: Field3, P: PotentialSet, eps: float, method: str = "newton") -> NehariPoint:
    if not np.any(u.values):
        raise NehariDegenerateError("zero field has no Nehari projection")
    ray = ray_polynomial(u, P, eps)
    t = ray.project(method)
    return NehariPoint(t, ray.residual(t))


def coercivity_gap(u: Field3, P: PotentialSet, eps: float, points=None) -> float:
    """``I(u) - (1/2 - 1/q_{i0}) ||u||^2`` for ``u`` on the Nehari manifold.

    Nonnegative whenever the sign pattern on the ``Q_i`` holds.
    """
    if points is not None:
        P.validate(points)
    else:
        c = P.on_grid(u.grid, eps)
        for i, Qi in enumerate(c.Q, 1):
            if (i < P.i0 and Qi.max() > 0) or (i > P.i0 and Qi.min() < 0):
                raise PotentialError(f"(f2) violated by Q_{i} on the grid")
    ray = ray_polynomial(u, P, eps)
    if ray.residual(1.0) > 1e-8:
        raise ValueError(f"u is not on the Nehari manifold (residual {ray.residual(1.0):.3g})")
    qp = P.q[P.i0 - 1]
    return ray.energy(1.0) - (0.5 - 1.0 / qp) * ray.quadratic


def ray_argmax(ray: RayPolynomial, span: float = 0.5, n: int = 2001) -> float:
    """Maximizer of ``t -> I(t u)`` on a dense grid around 1, refined by golden section."""
    ts = np.linspace(max(1e-3, 1 - span), 1 + span, n)
    vals = np.array([ray.energy(t) for t in ts])
    k = int(np.argmax(vals))
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, n - 1)]
    gr = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = ray.energy(c), ray.energy(d)
    while b - a > 1e-12:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = ray.energy(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = ray.energy(d)
    return 0.5 * (a + b)
