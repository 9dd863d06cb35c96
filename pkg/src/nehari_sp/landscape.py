"""The ground-energy landscape ``G(s)``, the limit level and the critical-level test.

``G(s)`` is the least energy of the autonomous problem with every coefficient
frozen at the point ``s`` (the Poisson term weighted by ``h(s)^2``).  Sampling
it on a box gives ``c0 = min G``, the near-minimizing set and, compared with
the level ``c_inf`` of the problem at infinity, the existence verdict
``c_inf > c0``.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bubble import critical_threshold
from .fields import RadialGrid, fft_workers
from .potentials import Frozen, PotentialError, PotentialSet, box_points
from .solver import DEFAULT_RADIAL, RADIAL_CONFIG, SolverConfig, SolverError, solve_frozen

log = logging.getLogger(__name__)

#: Relative width of the sublevel set taken as the minimizer set.
ARGMIN_TOL = 1e-4
#: Relative gap below which ``c_inf`` and ``c0`` count as equal.
LEVEL_TOL = 1e-8


class DegenerateFrozenError(PotentialError):
    """Frozen coefficients admit no Nehari point (nothing attractive, or ``V <= 0``)."""


def _solve(frozen: Frozen, cfg: SolverConfig, grid: RadialGrid) -> float:
    if not frozen.a > 0:
        raise DegenerateFrozenError(f"V = {frozen.a:.6g} is not positive")
    if not frozen.attractive():
        raise DegenerateFrozenError(
            f"no attractive term at or after the pivot (b = {frozen.b})")
    try:
        gs = solve_frozen(frozen, cfg, grid, strict=False)
    except PotentialError as exc:
        raise DegenerateFrozenError(str(exc)) from exc
    if not gs.converged:
        raise SolverError(f"radial solve unconverged at {frozen} ({gs.status})")
    return gs.energy


def ground_energy(P: PotentialSet, s, cfg: SolverConfig = RADIAL_CONFIG,
                  grid: RadialGrid = DEFAULT_RADIAL) -> float:
    """``G(s)``: least energy with coefficients frozen at ``s``."""
    return _solve(P.frozen_at(np.asarray(s, dtype=float)), cfg, grid)


def limit_level(P: PotentialSet, cfg: SolverConfig = RADIAL_CONFIG,
                grid: RadialGrid = DEFAULT_RADIAL) -> float:
    """``c_inf`` from the declared limits ``V_inf, Q_i^inf, K_inf, h_inf``."""
    return _solve(P.frozen_limit(), cfg, grid)


def lower_floor(P: PotentialSet, points, cfg: SolverConfig = RADIAL_CONFIG,
                grid: RadialGrid = DEFAULT_RADIAL) -> float:
    """Monotonicity floor: the autonomous level at ``(inf V, sup Q_i, sup K, inf h^2)``."""
    return _solve(P.extremes(np.atleast_2d(points)), cfg, grid)


@dataclass
class GroundEnergyMap:
    points: np.ndarray
    values: np.ndarray            # NaN where the frozen problem is degenerate
    degenerate: np.ndarray
    c0: float
    argmin: np.ndarray
    c_inf: float
    existence_verdict: bool
    tol: float = ARGMIN_TOL
    notes: list = field(default_factory=list)

    def dist_to_argmin(self, x) -> float:
        d = np.linalg.norm(self.argmin - np.asarray(x, dtype=float)[None, :], axis=1)
        return float(d.min())

    def lipschitz_estimate(self) -> float:
        """Largest difference quotient of ``G`` between nearest sample neighbours."""
        ok = ~self.degenerate
        pts, vals = self.points[ok], self.values[ok]
        if len(pts) < 2:
            return 0.0
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        np.fill_diagonal(d, np.inf)
        h = d.min()
        near = d <= h * (1 + 1e-9)
        dv = np.abs(vals[:, None] - vals[None, :])
        return float((dv[near] / d[near]).max())

    def write_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["sx", "sy", "sz", "G", "degenerate_flag"])
            for p, g, flag in zip(self.points, self.values, self.degenerate):
                w.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(p[2])),
                            "nan" if flag else repr(float(g)), int(flag)])


def ground_energy_map(P: PotentialSet, box: float, resolution: int,
                      cfg: SolverConfig = RADIAL_CONFIG, grid: RadialGrid = DEFAULT_RADIAL,
                      threads: int | None = None, tol: float = ARGMIN_TOL) -> GroundEnergyMap:
    """Sample ``G`` on ``resolution^3`` points of ``[-box, box]^3``.

    Degenerate samples are recorded (NaN, flagged) rather than raised.  Samples
    sharing the same frozen coefficients are solved once.
    """
    if not box > 0 and resolution > 1:
        raise ValueError("box must be positive")
    points = box_points(box, resolution)
    frozen = [P.frozen_at(p) for p in points]
    unique = list(dict.fromkeys(frozen))

    def run(f):
        try:
            return _solve(f, cfg, grid), ""
        except DegenerateFrozenError as exc:
            return math.nan, str(exc)

    workers = threads or fft_workers()
    if workers > 1 and len(unique) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            solved = dict(zip(unique, pool.map(run, unique)))
    else:
        solved = {f: run(f) for f in unique}
    values = np.array([solved[f][0] for f in frozen])
    degenerate = ~np.isfinite(values)
    notes = sorted({msg for _, msg in solved.values() if msg})
    if degenerate.all():
        raise DegenerateFrozenError("every sample of G is degenerate: " + "; ".join(notes))
    c0 = float(np.nanmin(values))
    argmin = points[~degenerate & (values <= c0 + tol * abs(c0))]
    try:
        c_inf = limit_level(P, cfg, grid)
    except PotentialError as exc:
        notes.append(f"limit level unavailable: {exc}")
        c_inf = math.nan
    verdict = bool(np.isfinite(c_inf) and c_inf > c0 + LEVEL_TOL * abs(c0))
    return GroundEnergyMap(points, values, degenerate, c0, argmin, c_inf, verdict, tol, notes)


def critical_level_check(gmap: GroundEnergyMap, P: PotentialSet) -> tuple[bool, float]:
    """``c0 < (1/3) S^{3/2} |K|_inf^{-1/2}`` and the margin (threshold minus ``c0``)."""
    k_sup = P.k_sup(gmap.points)
    if not k_sup > 0:
        raise ValueError("K vanishes identically: the critical threshold is infinite")
    margin = critical_threshold(k_sup) - gmap.c0
    return margin > 0, margin
