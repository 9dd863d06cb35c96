"""Positive ground states by Nehari-constrained Sobolev-gradient descent.

Each step moves against a preconditioned search direction, clips the
negative part, and projects back onto the Nehari manifold along the ray:

    u_{k+1} = t(v) v,   v = (u_k - tau d_k)^+,   d_k = (-Lap + Vbar)^{-1} r(u_k) [+ beta d_{k-1}]

``method="sd"`` uses the plain Sobolev gradient; ``method="cg"`` (default)
adds a Polak-Ribiere+ conjugate term, which handles the nearly flat
translation modes.  If the clipped step does not lower the energy the
unclipped one is taken (the energy is even; positivity of the limit is
checked, not assumed).  Every accepted step lowers the energy, and since
``I(t(v) v) = max_t I(t v)`` this is descent for the ray-maximum functional
whose infimum is the least energy level.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fields import Field3, Grid3, RadialField, RadialGrid, fft_workers
from .functional import EnergyBreakdown, GridProblem, NehariDegenerateError, RayPolynomial
from .potentials import Frozen, PotentialSet
from .radial import RadialProblem, check_autonomous

log = logging.getLogger(__name__)

#: Accepted states must keep ||u||_eps above this floor (collapse to zero otherwise).
NORM_FLOOR = 1e-3
# spectral Laplacians have no discrete maximum principle: under-resolved peaks ring
RINGING_TOL = 1e-3
#: Relative energy changes below this are treated as rounding noise in the line search.
ROUNDING = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 3000
    step: float = 1.0
    backtrack: float = 0.5
    grow: float = 1.3
    max_step: float = 20.0
    min_step: float = 1e-10
    tol: float = 1e-6
    stall_tol: float = 1e-9
    preconditioner: str = "sobolev"
    restarts: int = 2
    method: str = "cg"

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        for name in ("step", "tol", "stall_tol", "min_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.preconditioner not in ("sobolev", "identity"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if self.method not in ("cg", "sd"):
            raise ValueError(f"unknown descent method {self.method!r}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


class SolverError(RuntimeError):
    pass


@dataclass
class GroundState:
    u: Field3 | RadialField
    energy: float
    nehari_residual: float
    el_residual: float
    max_point: np.ndarray
    positive: bool
    converged: bool
    iterations: int
    breakdown: EnergyBreakdown
    history: list = field(default_factory=list, repr=False)
    multimodal: bool = False
    status: str = ""
    eps: float = 1.0
    shift: tuple = (0.0, 0.0, 0.0)

    def physical_max_point(self) -> np.ndarray:
        """Maximum in original coordinates: ``shift + eps * peak``."""
        if isinstance(self.u, RadialField):
            return np.asarray(self.max_point, dtype=float)
        return np.asarray(self.shift, dtype=float) + self.eps * self.u.peak()

    def log_rows(self):
        """``(iter, energy, el_residual, step)`` rows of the iteration log."""
        return list(self.history)


@dataclass
class _Descent:
    u: np.ndarray
    ray: RayPolynomial
    el: float
    converged: bool
    iterations: int
    history: list
    status: str


def _evaluate(problem, v):
    """Nehari projection of ``v``: ``(energy, t, ray, phi)`` or ``None``."""
    try:
        ray_v, phi_v = problem.ray(v)
        t_v = ray_v.project()
    except NehariDegenerateError:
        return None
    return ray_v.energy(t_v), t_v, ray_v, phi_v


def _trial(problem, u, direction, tau, energy, floor):
    """Clipped step first; the raw step is a guaranteed descent direction."""
    raw = u - tau * direction
    clipped = problem.clip(raw)
    best = None
    for v in (clipped, raw):
        ev = _evaluate(problem, v)
        if ev is not None and (best is None or ev[0] < best[0][0]):
            best = (ev, v)
        if best is not None and best[0][0] <= energy - floor:
            break
    return best


def descend(problem, u0: np.ndarray, cfg: SolverConfig,
            callback: Callable[[int, np.ndarray, float], None] | None = None) -> _Descent:
    """Run the projected descent on any problem exposing ``ray``, ``residual``,
    ``precondition``, ``dot`` and ``clip``."""
    u = problem.clip(np.asarray(u0, dtype=float))
    if not np.any(u):
        raise NehariDegenerateError("initial state has no positive part")
    ray, phi = problem.ray(u)
    t = ray.project()
    u, phi, ray = t * u, t * t * phi, ray.scaled(t)
    energy = ray.energy()
    res = problem.residual(u, phi)
    el = math.sqrt(problem.dot(res, res) / ray.quadratic)
    history = [(0, energy, el, 0.0)]
    if callback:
        callback(0, u, energy)
    tau = cfg.step
    d_energy = math.inf
    status = "max_iters"
    converged = False
    prev = None  # (residual, preconditioned residual, direction) of the last step
    k = 0
    for k in range(1, cfg.max_iters + 1):
        if el <= cfg.tol and (k == 1 or d_energy <= cfg.stall_tol * abs(energy)):
            converged, status, k = True, "converged", k - 1
            break
        z = problem.precondition(res, cfg.preconditioner)
        direction = z
        if cfg.method == "cg" and prev is not None:
            r_old, z_old, d_old = prev
            beta = max(0.0, problem.dot(res - r_old, z) / problem.dot(r_old, z_old))
            direction = z + beta * d_old
            if problem.dot(res, direction) <= 0:
                direction = z
        slope = problem.dot(res, direction)
        floor = ROUNDING * abs(energy)
        found = None
        while tau >= cfg.min_step:
            best = _trial(problem, u, direction, tau, energy, floor)
            if best is not None and cfg.method == "cg" and abs(best[0][0] - energy) > 100 * floor:
                # one-point quadratic model along the direction
                curv = (best[0][0] - energy + slope * tau) / tau**2
                if curv > 0:
                    tau_q = min(max(slope / (2 * curv), tau / 8), 8 * tau)
                    if abs(tau_q / tau - 1) > 0.1:
                        alt = _trial(problem, u, direction, tau_q, energy, floor)
                        if alt is not None and alt[0][0] < best[0][0]:
                            best, tau = alt, tau_q
            if best is not None:
                (e_v, t_v, ray_v, phi_v), v = best
                if e_v <= energy - floor:
                    found = (best, None)
                    break
                if e_v <= energy + floor:
                    # energy differences at rounding level: accept on residual decrease
                    res_v = problem.residual(t_v * v, t_v * t_v * phi_v)
                    el_v = math.sqrt(problem.dot(res_v, res_v) / ray_v.scaled(t_v).quadratic)
                    if el_v < el:
                        found = (best, (res_v, el_v))
                        break
            if direction is not z:
                direction = z
                slope = problem.dot(res, z)
                continue
            tau *= cfg.backtrack
        if found is None:
            status = "line search stalled"
            k -= 1
            break
        ((e_v, t_v, ray_v, phi_v), v), known = found
        prev = (res, z, direction)
        u, phi, ray = t_v * v, t_v * t_v * phi_v, ray_v.scaled(t_v)
        d_energy = max(energy - e_v, 0.0)
        energy = ray.energy()
        if known is None:
            res = problem.residual(u, phi)
            el = math.sqrt(problem.dot(res, res) / ray.quadratic)
        else:
            res, el = known
        history.append((k, energy, el, tau))
        if callback:
            callback(k, u, energy)
        if cfg.method == "sd":
            tau = min(tau * cfg.grow, cfg.max_step)
    else:
        if el <= cfg.tol and d_energy <= cfg.stall_tol * abs(energy):
            converged, status = True, "converged"
        k = cfg.max_iters
    return _Descent(u, ray, el, converged, k, history, status)


def _grid_state(problem: GridProblem, d: _Descent) -> GroundState:
    u = problem.field(d.u)
    vals = d.u
    imax = np.unravel_index(int(np.argmax(vals)), vals.shape)
    n = problem.grid.n
    # half-box around the maximum, periodically wrapped
    rolled = np.roll(vals, [n // 2 - i for i in imax], axis=(0, 1, 2))
    core = rolled[n // 4: 3 * n // 4, n // 4: 3 * n // 4, n // 4: 3 * n // 4]
    positive = bool(vals.min() >= -RINGING_TOL * vals.max() and core.min() > 0)
    return GroundState(
        u=u, energy=d.ray.energy(), nehari_residual=d.ray.residual(), el_residual=d.el,
        max_point=u.max_point(), positive=positive,
        converged=d.converged and math.sqrt(d.ray.quadratic) >= NORM_FLOOR,
        iterations=d.iterations, breakdown=EnergyBreakdown.from_ray(d.ray),
        history=d.history, status=d.status)


def minimize_nehari(P: PotentialSet, eps: float, init: Field3, cfg: SolverConfig = SolverConfig(),
                    callback=None, shift=(0.0, 0.0, 0.0)) -> GroundState:
    """Least-energy positive state of the rescaled problem on ``init.grid``."""
    problem = GridProblem.build(P, init.grid, eps, shift)
    d = descend(problem, init.values, cfg, callback)
    gs = _grid_state(problem, d)
    gs.eps, gs.shift = float(eps), tuple(float(v) for v in shift)
    if not gs.converged:
        log.info("minimize_nehari: eps=%g stopped unconverged (%s, el=%.3g)", eps, d.status, d.el)
    return gs


def gaussian_seed(grid: Grid3, center, width: float = 1.5, amplitude: float = 1.0) -> Field3:
    """Gaussian bump centered at ``center`` (rescaled coordinates), wrapped periodically."""
    x, y, z = grid.mesh()
    L = grid.L
    c = np.asarray(center, dtype=float)
    dx = (x - c[0] + L) % (2 * L) - L
    dy = (y - c[1] + L) % (2 * L) - L
    dz = (z - c[2] + L) % (2 * L) - L
    return Field3(grid, amplitude * np.exp(-(dx * dx + dy * dy + dz * dz) / (2 * width**2)))


# ---------------------------------------------------------------- radial

DEFAULT_RADIAL = RadialGrid(4096, 60.0)
#: el ~ 1e-8 is the rounding floor of the radial residual; energy error scales as el^2.
RADIAL_CONFIG = SolverConfig(tol=1e-8)
_SEED_WIDTHS = (1.0, 3.0, 0.5, 6.0)
_radial_cache: dict = {}


def solve_frozen(frozen: Frozen, cfg: SolverConfig = RADIAL_CONFIG,
                 grid: RadialGrid = DEFAULT_RADIAL, strict: bool = False) -> GroundState:
    """Radial ground state of the autonomous problem with frozen coefficients."""
    check_autonomous(frozen, strict=strict)
    key = (frozen, cfg, grid)
    hit = _radial_cache.get(key)
    if hit is not None:
        return hit
    problem = RadialProblem(frozen, grid)
    runs = []
    for width in _SEED_WIDTHS[: cfg.restarts]:
        try:
            runs.append(descend(problem, problem.gaussian(width), cfg))
        except NehariDegenerateError:
            continue
    if not runs:
        raise SolverError(f"no radial restart produced a Nehari point for {frozen}")
    good = [d for d in runs if d.converged] or runs
    best = min(good, key=lambda d: d.ray.energy())
    energies = [d.ray.energy() for d in good]
    u = problem.field(best.u)
    gs = GroundState(
        u=u, energy=best.ray.energy(), nehari_residual=best.ray.residual(),
        el_residual=best.el, max_point=np.array([grid.r[int(np.argmax(u.values))]]),
        positive=bool(u.values.min() >= 0 and u.values[: grid.n_r // 2].min() > 0),
        converged=best.converged, iterations=best.iterations,
        breakdown=EnergyBreakdown.from_ray(best.ray), history=best.history,
        multimodal=(max(energies) - min(energies)) > 1e-4 * abs(best.ray.energy()),
        status=best.status)
    if len(_radial_cache) > 4096:
        _radial_cache.clear()
    _radial_cache[key] = gs
    return gs


def radial_ground_state(a: float, b, q, cfg: SolverConfig = RADIAL_CONFIG, *,
                        i0: int = 1, poisson_weight: float = 1.0,
                        grid: RadialGrid = DEFAULT_RADIAL) -> tuple[RadialField, float]:
    """Ground state and least energy ``c_ab`` of the autonomous problem.

    ``b`` lists ``b_1..b_m`` followed by the critical weight ``b_{m+1}``;
    requires ``a > 0``, ``b_{i0} > 0`` and ``(j - i0) b_j > 0``.
    """
    frozen = Frozen(float(a), tuple(float(v) for v in b), tuple(float(v) for v in q),
                    int(i0), float(poisson_weight))
    if len(frozen.b) != len(frozen.q) + 1:
        raise ValueError("b needs one entry per exponent plus the critical weight")
    gs = solve_frozen(frozen, cfg, grid, strict=True)
    if not gs.converged:
        raise SolverError(f"radial solve did not converge ({gs.status}, el={gs.el_residual:.3g})")
    return gs.u, gs.energy


# ---------------------------------------------------------------- multistart

def seed_points(P: PotentialSet, k: int, gmap=None, min_sep: float = 1e-9) -> list[np.ndarray]:
    """Up to ``k`` distinct physical seed points: the ``k - 1`` lowest sampled
    ``G`` values, then the declared K-maximizer ``x0``, then further low ``G``
    samples.  ``k = 1`` gives the ``G`` argmin alone."""
    ranked = []
    if gmap is not None:
        vals = np.where(np.isfinite(gmap.values), gmap.values, np.inf)
        ranked = [np.asarray(gmap.points[i], dtype=float) for i in np.argsort(vals, kind="stable")]
    if not ranked:
        ranked = [np.zeros(3)]
    head = ranked[: max(k - 1, 1)]
    order = head + [np.asarray(P.x0, dtype=float)] + ranked[len(head):]
    seeds: list[np.ndarray] = []
    for s in order:
        if all(np.linalg.norm(s - o) > min_sep for o in seeds):
            seeds.append(s)
        if len(seeds) == k:
            break
    return seeds


def multistart(P: PotentialSet, eps: float, cfg: SolverConfig, k: int, grid: Grid3,
               gmap=None, threads: int | None = None, width: float = 1.5) -> GroundState:
    """Lowest-energy converged state over deterministic seeds (see :func:`seed_points`).

    Each run centers the computational box on its seed point (``shift``) and
    starts from a Gaussian at the rescaled origin.
    """
    if k < 1:
        raise ValueError("multistart needs k >= 1")
    seeds = seed_points(P, k, gmap, min_sep=0.5 * eps * grid.spacing)
    init = gaussian_seed(grid, (0.0, 0.0, 0.0), width)

    def run(s):
        try:
            return minimize_nehari(P, eps, init, cfg, shift=tuple(s))
        except NehariDegenerateError:
            return None

    workers = threads or fft_workers()
    if workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, seeds))
    else:
        results = [run(s) for s in seeds]
    results = [r for r in results if r is not None]
    if not results:
        raise SolverError("all multistart seeds failed")
    good = [r for r in results if r.converged] or results
    best = min(good, key=lambda r: r.energy)
    spread = max(r.energy for r in good) - min(r.energy for r in good)
    best.multimodal = spread > 1e-6 * abs(best.energy)
    return best
