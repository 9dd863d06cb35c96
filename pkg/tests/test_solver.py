import numpy as np
import pytest

from nehari_sp.fields import Grid3, RadialGrid
from nehari_sp.functional import GridProblem, ray_argmax
from nehari_sp.potentials import Frozen, PotentialError, PotentialSet
from nehari_sp.radial import RadialProblem
from nehari_sp.solver import (DEFAULT_RADIAL, RADIAL_CONFIG, SolverConfig, SolverError, descend,
                              gaussian_seed, minimize_nehari, multistart, radial_ground_state,
                              seed_points, solve_frozen)


@pytest.mark.parametrize("kw", [
    dict(max_iters=0), dict(tol=0.0), dict(backtrack=1.0), dict(step=-1.0),
    dict(preconditioner="jacobi"), dict(method="lbfgs"), dict(restarts=0),
])
def test_solver_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


@pytest.mark.parametrize("a, b, i0", [
    (0.0, (100.0, 1.0), 1),        # a must be positive
    (0.5, (-1.0, 1.0), 1),         # pivot weight must be positive
    (0.5, (-1.0, 100.0, 0.0), 2),  # K must be positive after the pivot
])
def test_radial_constraints(a, b, i0):
    q = (4.2,) if len(b) == 2 else (4.2, 4.6)
    with pytest.raises(PotentialError):
        radial_ground_state(a, b, q, i0=i0)


def test_radial_state_properties():
    u, c = radial_ground_state(0.5, (100.0, 1.0), (4.2,))
    assert c > 0
    assert np.all(u.values >= 0)
    assert np.argmax(u.values) < 5           # maximum at the origin
    assert np.all(np.diff(u.values[5:]) <= 1e-14)  # radially decreasing
    assert u.tail_ratio() < 1e-10


def test_radial_truncation_independent():
    _, c1 = radial_ground_state(0.5, (100.0, 1.0), (4.2,))
    _, c2 = radial_ground_state(0.5, (100.0, 1.0), (4.2,), grid=DEFAULT_RADIAL.refined_extent())
    assert c2 == pytest.approx(c1, rel=1e-10)


def test_radial_monotone_in_a_and_b():
    c = {(a, b): radial_ground_state(a, (b, 1.0), (4.2,))[1]
         for a in (0.4, 0.5) for b in (90.0, 100.0)}
    assert c[(0.5, 100.0)] - c[(0.4, 100.0)] > 1e-6
    assert c[(0.5, 90.0)] - c[(0.5, 100.0)] > 1e-6


def test_radial_critical_term_lowers_level():
    _, with_k = radial_ground_state(0.5, (100.0, 1.0), (4.2,))
    gs = solve_frozen(Frozen(0.5, (100.0, 0.0), (4.2,), 1, 1.0))
    assert gs.converged and with_k < gs.energy


def test_fixed_point_needs_no_iterations():
    f = Frozen(0.5, (100.0, 1.0), (4.2,), 1, 1.0)
    gs = solve_frozen(f)
    prob = RadialProblem(f, DEFAULT_RADIAL)
    d = descend(prob, DEFAULT_RADIAL.r * gs.u.values, RADIAL_CONFIG)
    assert d.converged and d.iterations == 0


def test_radial_state_on_ray_maximum():
    f = Frozen(0.6, (90.0, 1.0), (4.2,), 1, 1.0)
    gs = solve_frozen(f)
    ray, _ = RadialProblem(f, DEFAULT_RADIAL).ray(DEFAULT_RADIAL.r * gs.u.values)
    assert abs(ray_argmax(ray) - 1.0) < 1e-6


def test_energy_log_nonincreasing():
    gs = solve_frozen(Frozen(0.5, (100.0, 1.0), (4.2,), 1, 1.0))
    e = np.array([row[1] for row in gs.log_rows()])
    assert np.all(np.diff(e) <= 1e-14 * abs(e[-1]))


def test_unconverged_is_flagged(grid32, single_well):
    gs = minimize_nehari(single_well, 1.0, gaussian_seed(grid32, (0, 0, 0)),
                         SolverConfig(max_iters=1))
    assert not gs.converged and gs.status == "max_iters"
    assert gs.nehari_residual < 1e-10  # iterates always sit on the Nehari manifold


def test_seed_points_order(single_well):
    assert [s.tolist() for s in seed_points(single_well, 1)] == [[0.0, 0.0, 0.0]]
    P = PotentialSet(V="1", Q=["1"], q=[4.5], K="1", x0=(1.0, 0.0, 0.0))
    seeds = seed_points(P, 3)
    assert [s.tolist() for s in seeds] == [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
    with pytest.raises(ValueError):
        multistart(P, 1.0, SolverConfig(), 0, Grid3(16, 4.0))


@pytest.mark.slow
def test_grid_state_matches_radial(constants):
    grid = Grid3(64, 8.0)
    gs = minimize_nehari(constants, 1.0, gaussian_seed(grid, (0.3, -0.2, 0.1)), SolverConfig())
    assert gs.converged and gs.positive
    u_rad, c = radial_ground_state(0.5, (100.0, 1.0), (4.2,))
    assert gs.energy == pytest.approx(c, rel=1e-3)
    w = u_rad(grid.radius(gs.u.peak()))
    err = np.sqrt(np.sum((gs.u.values - w) ** 2) / np.sum(w**2))
    assert err < 1e-2
    ray, _ = GridProblem.build(constants, grid, 1.0).ray(gs.u.values)
    assert abs(ray_argmax(ray) - 1.0) < 1e-6


def test_degenerate_initial_state(grid32, single_well):
    from nehari_sp.functional import NehariDegenerateError
    with pytest.raises(NehariDegenerateError):
        minimize_nehari(single_well, 1.0, gaussian_seed(grid32, (0, 0, 0)) * -1.0, SolverConfig())


def test_strict_radial_raises_when_unconverged():
    with pytest.raises(SolverError):
        radial_ground_state(0.5, (100.0, 1.0), (4.2,), SolverConfig(max_iters=2),
                            grid=RadialGrid(2048, 60.0))
