"""Property suite: analytic oracles, scaling laws, Nehari consistency, monotonicity
of the autonomous levels, Sobolev-constant and bubble estimates, the critical
level margin on shipped configurations, decay fits and gradient checks.

Every property returns :class:`Check` records; :func:`run_checks` selects
groups by name and reports them in a fixed order.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import erf

from . import coulomb
from .bubble import bubble_estimates, expected_slope, gaussian_quotient, sobolev_constant
from .concentration import decay_fit
from .config import load_config, shipped_configs
from .fields import Field3, Grid3
from .functional import GridProblem, ray_argmax
from .landscape import critical_level_check, ground_energy_map
from .potentials import Frozen, PotentialSet
from .radial import RadialProblem
from .solver import (DEFAULT_RADIAL, SolverConfig, gaussian_seed, minimize_nehari,
                     radial_ground_state)

#: Talenti's closed form of the Sobolev constant in three dimensions, 3 (pi/2)^(4/3),
#: which equals (3/4)(2 pi^2)^(2/3).
TALENTI = 3.0 * (0.5 * math.pi) ** (4.0 / 3.0)
#: Baseline of the monotonicity lattice (Q-regime used by the shipped configs).
LATTICE_A = (0.4, 0.5, 0.6)
LATTICE_B = (90.0, 100.0, 110.0)
LATTICE_Q = 4.2
#: Configurations whose critical-level margin is part of the suite.
MARGIN_CONFIGS = ("single_well", "competing", "constants")


@dataclass
class Check:
    group: str
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.group}/{self.name}: {self.value:.3e} (limit {self.threshold:.1e}) {self.detail}".rstrip()

    def as_dict(self) -> dict:
        d = asdict(self)
        d["value"] = float(d["value"])
        return d


def _check(group, name, value, threshold, passed=None, detail=""):
    value = float(value)
    if passed is None:
        passed = bool(np.isfinite(value) and value <= threshold)
    return Check(group, name, bool(passed), value, float(threshold), detail)


def random_fields(grid: Grid3, count: int, seed: int = 0) -> list[Field3]:
    """Smooth positive test fields: sums of three Gaussians with random centers and widths."""
    rng = np.random.default_rng(seed)
    x, y, z = grid.mesh()
    out = []
    for _ in range(count):
        v = np.zeros(grid.shape)
        for _ in range(3):
            c = rng.uniform(-0.25 * grid.L, 0.25 * grid.L, 3)
            w = rng.uniform(0.6, 1.5)
            a = rng.uniform(0.2, 1.0)
            v += a * np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2) / (2 * w * w))
        out.append(Field3(grid, v))
    return out


def _rel(a, b) -> float:
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


# ---------------------------------------------------------------- properties

def check_poisson() -> list[Check]:
    grid = Grid3(64, 12.0)
    t0 = time.perf_counter()
    coulomb.kernel_for.cache_clear()
    u = Field3(grid, np.exp(-0.5 * grid.radius() ** 2))
    phi = coulomb.coulomb_potential(u).values
    elapsed = time.perf_counter() - t0
    r = grid.radius()
    safe = np.where(r > 0, r, 1.0)
    exact = np.where(r > 0, math.pi**1.5 * erf(safe) / safe, 2.0 * math.pi)
    sel = r < grid.L / 2
    err = float(np.max(np.abs(phi[sel] - exact[sel]) / exact[sel]))
    return [_check("poisson", "gaussian_oracle", err, 1e-3),
            _check("poisson", "runtime_s", elapsed, 5.0)]


def check_scalings(count: int = 10) -> list[Check]:
    grid = Grid3(32, 8.0)
    pot, en, bound = 0.0, 0.0, -math.inf
    for u in random_fields(grid, count, seed=1):
        phi = coulomb.coulomb_potential(u).values
        e = coulomb.coulomb_energy(u)
        for t in (0.5, 2.0, 3.0):
            pot = max(pot, _rel(coulomb.coulomb_potential(u * t).values, t * t * phi))
            en = max(en, abs(coulomb.coulomb_energy(u * t) - t**4 * e) / abs(t**4 * e))
        lhs, rhs = coulomb.coulomb_bound_check(u)
        bound = max(bound, lhs / rhs)
    return [_check("scalings", "potential_t2", pot, 1e-10),
            _check("scalings", "energy_t4", en, 1e-10),
            _check("scalings", "bound_ratio", bound, 1.0)]


def _baseline_problem(grid: Grid3) -> GridProblem:
    P = PotentialSet(V="1 - 0.5*exp(-(x^2+y^2+z^2))", Q=["100"], q=[4.2], K="1")
    return GridProblem.build(P, grid, 1.0)


def check_nehari(count: int = 100) -> list[Check]:
    grid = Grid3(16, 6.0)
    prob = _baseline_problem(grid)
    rng = np.random.default_rng(2)
    agree, invariance, resid = 0.0, 0.0, 0.0
    for u in random_fields(grid, count, seed=2):
        u = u * float(rng.uniform(0.05, 5.0))
        ray, _ = prob.ray(u.values)
        tn, tb = ray.project("newton"), ray.project("bisection")
        agree = max(agree, abs(tn - tb) / tn)
        lam = float(rng.uniform(0.3, 3.0))
        t_lam = prob.ray(lam * u.values)[0].project("newton")
        invariance = max(invariance, abs(lam * t_lam - tn) / tn)
        resid = max(resid, ray.residual(tn))
    return [_check("nehari", "newton_vs_bisection", agree, 1e-10),
            _check("nehari", "ray_invariance", invariance, 1e-9),
            _check("nehari", "projected_residual", resid, 1e-10)]


def _lattice():
    """Radial levels on the monotonicity lattice keyed by (a, b), and the wall time."""
    t0 = time.perf_counter()
    states = {(a, b): radial_ground_state(a, (b, 1.0), (LATTICE_Q,))
              for a in LATTICE_A for b in LATTICE_B}
    return states, time.perf_counter() - t0


def check_ray(lattice=None) -> list[Check]:
    lattice, _ = lattice if lattice is not None else _lattice()
    worst = 0.0
    for (a, b), (u, _) in lattice.items():
        prob = RadialProblem(Frozen(a, (b, 1.0), (LATTICE_Q,), 1, 1.0), u.grid)
        ray, _ = prob.ray(u.grid.r * u.values)
        worst = max(worst, abs(ray_argmax(ray) - 1.0))
    out = [_check("ray", "radial_states", worst, 1e-6, detail=f"{len(lattice)} states")]
    grid = Grid3(64, 8.0)
    P = PotentialSet(V="1 - 0.5*exp(-(x^2+y^2+z^2))", Q=["100"], q=[4.2], K="1")
    gs = minimize_nehari(P, 1.0, gaussian_seed(grid, (0.0, 0.0, 0.0)), SolverConfig())
    ray, _ = GridProblem.build(P, grid, 1.0).ray(gs.u.values)
    err = abs(ray_argmax(ray) - 1.0) if gs.converged else math.inf
    out.append(_check("ray", "grid_state", err, 1e-6, detail=gs.status))
    return out


def check_monotonicity(lattice=None) -> list[Check]:
    lattice, elapsed = lattice if lattice is not None else _lattice()
    c = {k: v[1] for k, v in lattice.items()}
    da = min(c[(a2, b)] - c[(a1, b)] for b in LATTICE_B
             for a1, a2 in zip(LATTICE_A, LATTICE_A[1:]))
    db = min(c[(a, b1)] - c[(a, b2)] for a in LATTICE_A
             for b1, b2 in zip(LATTICE_B, LATTICE_B[1:]))
    return [_check("monotonicity", "increasing_in_a", da, 1e-6, passed=da > 1e-6),
            _check("monotonicity", "decreasing_in_b", db, 1e-6, passed=db > 1e-6),
            _check("monotonicity", "runtime_s", elapsed, 30.0)]


def check_sobolev() -> list[Check]:
    S1, S2 = sobolev_constant(1.0), sobolev_constant(0.1)
    gq = gaussian_quotient(1.0)
    return [_check("sobolev", "sigma_invariance", abs(S1 - S2) / S1, 1e-8),
            _check("sobolev", "talenti_value", abs(S1 - TALENTI) / TALENTI, 1e-6),
            _check("sobolev", "gaussian_above", S1 - gq, 0.0, passed=gq > S1)]


def check_bubbles() -> list[Check]:
    table = bubble_estimates([0.2, 0.1, 0.05, 0.025])
    out = []
    for t in (2.0, 2.5, 4.0, 5.0):
        err = abs(table.slopes[t] - expected_slope(t))
        out.append(_check("bubbles", f"slope_t{t:g}", err, 0.05,
                          detail=f"slope {table.slopes[t]:.4f}"))
    out.append(_check("bubbles", "l6_order", table.l6_order, 2.5, passed=table.l6_order >= 2.5))
    return out


def check_margin(names=MARGIN_CONFIGS) -> list[Check]:
    paths = shipped_configs()
    out = []
    for name in names:
        cfg = load_config(paths[name])
        gmap = ground_energy_map(cfg.potentials, cfg.gmap_box, cfg.gmap_resolution,
                                 grid=cfg.radial)
        ok, margin = critical_level_check(gmap, cfg.potentials)
        out.append(_check("margin", name, margin, 0.0, passed=ok, detail=f"c0 {gmap.c0:.6g}"))
    return out


def check_decay() -> list[Check]:
    grid = Grid3(64, 8.0)
    r = grid.radius()
    worst = 0.0
    for mu in (0.5, 1.0, 2.0, 4.0):
        fit = decay_fit(Field3(grid, np.exp(-mu * r)), center=(0.0, 0.0, 0.0))
        worst = max(worst, abs(fit.mu - mu) / mu)
    gauss = decay_fit(Field3(grid, np.exp(-0.5 * r * r)), center=(0.0, 0.0, 0.0))
    return [_check("decay", "synthetic_mu", worst, 1e-3),
            _check("decay", "gaussian_flagged", gauss.fit_quality, 1.0, passed=not gauss.ok)]


def _fd_error(problem, u, d, energy_of, delta=1e-4) -> float:
    fd = (energy_of(u + delta * d) - energy_of(u - delta * d)) / (2 * delta)
    an = problem.dot(problem.residual(u, problem.potential(u)), d)
    return abs(fd - an) / abs(an)


def check_gradient() -> list[Check]:
    grid = Grid3(32, 8.0)
    P = PotentialSet(V="1 - 0.5*exp(-(x^2+y^2+z^2))", Q=["-5", "100"], q=[4.2, 4.6],
                     K="1 + 0.1*cos(x)", i0=2, h="1 - 0.5*exp(-x^2)")
    prob = GridProblem.build(P, grid, 0.7)
    u, d = (f.values for f in random_fields(grid, 2, seed=3))
    e3 = _fd_error(prob, u, d, lambda v: prob.ray(v)[0].energy())
    rp = RadialProblem(Frozen(0.5, (-5.0, 100.0, 1.0), (4.2, 4.6), 2, 1.0), DEFAULT_RADIAL)
    r = DEFAULT_RADIAL.r
    w, dw = r * np.exp(-0.5 * r * r), r * np.exp(-0.1 * r * r)
    er = _fd_error(rp, w, dw, lambda v: rp.ray(v)[0].energy())
    return [_check("gradient", "grid_residual", e3, 1e-6),
            _check("gradient", "radial_residual", er, 1e-6)]


GROUPS = ("poisson", "scalings", "nehari", "ray", "monotonicity", "sobolev", "bubbles",
          "margin", "decay", "gradient")


def run_checks(filter: str | None = None, report=None) -> list[Check]:
    """Run every group whose name contains ``filter`` (all groups when ``None``)."""
    selected = [g for g in GROUPS if filter is None or filter in g]
    if not selected:
        raise ValueError(f"no property group matches {filter!r}; groups: {', '.join(GROUPS)}")
    lattice = _lattice() if {"ray", "monotonicity"} & set(selected) else None
    results: list[Check] = []
    for g in selected:
        fn = globals()[f"check_{g}"]
        checks = fn(lattice) if g in ("ray", "monotonicity") else fn()
        for c in checks:
            if report:
                report(c)
        results.extend(checks)
    return results
