"""Semiclassical diagnostics: epsilon scans, exponential decay fits and the
translation-runaway probe for potentials that sit above their limits.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .fields import Field3, Grid3, integrate
from .landscape import GroundEnergyMap, limit_level, lower_floor
from .potentials import PotentialError, PotentialSet
from .solver import (DEFAULT_RADIAL, GroundState, SolverConfig, gaussian_seed, minimize_nehari,
                     multistart, solve_frozen)

log = logging.getLogger(__name__)

#: Minimum binned R^2 for an exponential tail fit to be accepted.
FIT_THRESHOLD = 0.98
#: Outer edge of the fitting annulus as a fraction of the half box (periodic images beyond).
OUTER_FRACTION = 0.75


class DecayFitError(ValueError):
    pass


# ---------------------------------------------------------------- decay

@dataclass(frozen=True)
class DecayFit:
    C: float
    mu: float
    fit_quality: float
    r_inner: float
    r_outer: float

    @property
    def ok(self) -> bool:
        return self.mu > 0 and self.fit_quality >= FIT_THRESHOLD

    def barrier_bound(self, v0: float, tol: float = 1e-2) -> bool:
        """``mu^2 < V(x0)/2 + tol``."""
        return self.mu**2 < 0.5 * v0 + tol


def periodic_radius(grid: Grid3, center) -> np.ndarray:
    """Distance to ``center`` with minimum-image wrapping."""
    x, y, z = grid.mesh()
    L = grid.L
    c = np.asarray(center, dtype=float)
    d2 = 0.0
    for a, ci in zip((x, y, z), c):
        d = (a - ci + L) % (2 * L) - L
        d2 = d2 + d * d
    return np.sqrt(d2)


def decay_fit(u: Field3, center=None, eps: float = 1.0, r_inner: float | None = None,
              r_outer: float | None = None) -> DecayFit:
    """Fit ``log u ~ log C - mu |x - center|`` on an annulus (rescaled units).

    The annulus runs from the half-maximum radius to ``0.75 L``.  ``log u`` is
    averaged in radial shells one grid spacing wide before the least-squares
    line is fitted; ``fit_quality`` is the R^2 of that shell fit.  ``eps`` only
    documents the scaling: the physical rate is ``mu / eps``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    g = u.grid
    if center is None:
        center = u.peak()
    r = periodic_radius(g, center).ravel()
    v = u.values.ravel()
    vmax = float(v.max())
    if not vmax > 0:
        raise DecayFitError("decay fit needs a positive maximum")
    h = g.spacing
    if r_inner is None:
        below = r[v < 0.5 * vmax]
        r_inner = float(below.min()) if below.size else h
    if r_outer is None:
        r_outer = OUTER_FRACTION * g.L
    if not r_outer > r_inner + 2 * h:
        raise DecayFitError(f"annulus [{r_inner:.3g}, {r_outer:.3g}] is too thin")
    sel = (r >= r_inner) & (r <= r_outer)
    if np.any(v[sel] <= 0):
        raise DecayFitError("nonpositive values inside the fitting annulus")
    rs, lv = r[sel], np.log(v[sel])
    edges = np.arange(r_inner, r_outer + h, h)
    idx = np.digitize(rs, edges)
    counts = np.bincount(idx)
    keep = counts > 0
    rbar = (np.bincount(idx, rs)[keep] / counts[keep])
    lbar = (np.bincount(idx, lv)[keep] / counts[keep])
    if rbar.size < 3:
        raise DecayFitError("too few radial shells in the annulus")
    slope, intercept = np.polyfit(rbar, lbar, 1)
    pred = intercept + slope * rbar
    ss_res = float(np.sum((lbar - pred) ** 2))
    ss_tot = float(np.sum((lbar - lbar.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return DecayFit(float(math.exp(intercept)), float(-slope), r2, float(r_inner), float(r_outer))


# ---------------------------------------------------------------- scan

@dataclass
class ConcentrationReport:
    eps: float
    c_eps: float
    x_eps: np.ndarray
    dist: float                 # NaN when the minimizer set is unconstrained
    profile_err: float
    decay: DecayFit | None
    converged: bool
    el_residual: float
    poisson: float
    state: GroundState = field(repr=False, default=None)


@dataclass
class ScanResult:
    reports: list
    c0: float
    c_lower: float
    c_inf: float
    verdict: bool
    dist_applicable: bool
    grid: Grid3

    def converged(self) -> list:
        return [r for r in self.reports if r.converged]

    def energy_bounds_ok(self, tol: float = 1e-6) -> bool:
        return all(r.c_eps >= self.c_lower - tol for r in self.converged())

    def dist_tail_nonincreasing(self, noise: float | None = None, tail: int = 3) -> bool:
        """Distances over the last ``tail`` converged entries never grow by more than ``noise``."""
        if not self.dist_applicable:
            return True
        if noise is None:
            noise = 0.5 * self.grid.spacing * min(r.eps for r in self.reports)
        d = [r.dist for r in self.converged()][-tail:]
        return all(b <= a + noise for a, b in zip(d, d[1:]))

    def profile_err_decreasing(self) -> bool:
        e = [r.profile_err for r in self.converged()]
        return all(b < a for a, b in zip(e, e[1:]))

    def final_within(self, frac: float) -> bool:
        good = self.converged()
        return bool(good) and abs(good[-1].c_eps - self.c0) <= frac * abs(self.c0)

    def write_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["eps", "c_eps", "xeps_x", "xeps_y", "xeps_z", "dist_to_G",
                        "profile_err", "mu", "C", "fit_q"])
            for r in self.reports:
                d = r.decay
                w.writerow([repr(r.eps), repr(r.c_eps)] + [repr(float(v)) for v in r.x_eps]
                           + ["n/a" if not self.dist_applicable else repr(r.dist),
                              repr(r.profile_err)]
                           + ([repr(d.mu), repr(d.C), repr(d.fit_quality)] if d else
                              ["nan", "nan", "nan"]))


def _is_constant(P: PotentialSet) -> bool:
    exprs = [P.V, P.K, *P.Q] + ([] if P.h is None else [P.h])
    return all(e.constant is not None for e in exprs)


def profile_error(gs: GroundState, P: PotentialSet) -> float:
    """Relative L^2 distance between the rescaled state and the radial ground state
    of the problem frozen at the observed concentration point."""
    limit = solve_frozen(P.frozen_at(gs.physical_max_point()), strict=False)
    u = gs.u
    w = limit.u(periodic_radius(u.grid, u.peak()))
    diff = u.values - w
    return math.sqrt(integrate(diff * diff, u.grid) / integrate(w * w, u.grid))


def epsilon_scan(P: PotentialSet, eps_list, cfg: SolverConfig, grid: Grid3,
                 gmap: GroundEnergyMap, k: int = 2, threads: int | None = None) -> ScanResult:
    """Ground states along a decreasing list of eps with concentration diagnostics.

    Unconverged entries are kept (flagged) but excluded from the trend checks.
    """
    eps = [float(e) for e in eps_list]
    if not eps:
        raise ValueError("eps list is empty")
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps list must be positive and strictly decreasing")
    const = _is_constant(P)
    c_lower = lower_floor(P, gmap.points)
    reports = []
    for e in eps:
        gs = multistart(P, e, cfg, k, grid, gmap, threads)
        x = gs.physical_max_point()
        try:
            fit = decay_fit(gs.u, eps=e)
        except DecayFitError as exc:
            log.info("eps=%g: decay fit failed (%s)", e, exc)
            fit = None
        reports.append(ConcentrationReport(
            eps=e, c_eps=gs.energy, x_eps=x,
            dist=math.nan if const else gmap.dist_to_argmin(x),
            profile_err=profile_error(gs, P), decay=fit, converged=gs.converged,
            el_residual=gs.el_residual, poisson=gs.breakdown.poisson, state=gs))
    return ScanResult(reports, gmap.c0, c_lower, gmap.c_inf, gmap.existence_verdict,
                      not const, grid)


# ---------------------------------------------------------------- nonexistence

@dataclass
class NonexistenceReport:
    eps: float
    c_eps: float
    c_inf: float
    rel_gap: float
    runaway: bool | None        # None: translation invariant, indeterminate
    drift_monotone: bool
    plateau_stall: bool
    converged: bool
    centroid_dist: list = field(repr=False, default_factory=list)
    energies: list = field(repr=False, default_factory=list)
    state: GroundState = field(repr=False, default=None)


def periodic_centroid(values: np.ndarray, grid: Grid3) -> np.ndarray:
    """Circular mean of the density ``u^2`` along each axis."""
    w = values * values
    L = grid.L
    theta = np.pi * (grid.axis + L) / L
    out = np.empty(3)
    for ax in range(3):
        other = tuple(i for i in range(3) if i != ax)
        m = w.sum(axis=other)
        ang = math.atan2(float(np.dot(m, np.sin(theta))), float(np.dot(m, np.cos(theta))))
        out[ax] = (ang * L / np.pi) % (2 * L) - L
    return out


#: Tight tolerance so the descent keeps following the weak translation force.
PROBE_CONFIG = SolverConfig(tol=1e-9, max_iters=150)


def nonexistence_probe(P: PotentialSet, eps: float, grid: Grid3,
                       cfg: SolverConfig = PROBE_CONFIG,
                       offset=(1.0, 0.0, 0.0), require_f5: bool = True,
                       width: float = 1.5) -> NonexistenceReport:
    """Evidence for the absence of ground states when ``V >= V_inf``.

    Starts a descent from a bump displaced by ``offset`` (rescaled units) and
    watches the density centroid.  The runaway indicator fires when the
    centroid's distance from the origin grows monotonically over the last half
    of the iterations, or when the energy sits within 3% of ``c_inf`` while the
    residual stalls above tolerance.
    """
    if require_f5:
        s = eps * grid.axis[::4]
        pts = np.stack(np.meshgrid(s, s, s, indexing="ij"), axis=-1).reshape(-1, 3)
        P.check_f5(pts)
    c_inf = limit_level(P)
    track: list[float] = []
    energies: list[float] = []

    def watch(k, u, energy):
        track.append(float(np.linalg.norm(periodic_centroid(u, grid))))
        energies.append(float(energy))

    gs = minimize_nehari(P, eps, gaussian_seed(grid, offset, width), cfg, callback=watch)
    rel = abs(gs.energy - c_inf) / abs(c_inf)
    half = track[len(track) // 2:]
    noise = 1e-3 * grid.spacing
    drift = (len(half) >= 2 and all(b >= a - noise for a, b in zip(half, half[1:]))
             and half[-1] - half[0] > noise and track[-1] > track[0] + grid.spacing)
    plateau = rel <= 0.03 and not gs.converged
    runaway = None if _is_constant(P) else bool(drift or plateau)
    return NonexistenceReport(eps, gs.energy, c_inf, rel, runaway, bool(drift), plateau,
                              gs.converged, track, energies, gs)
