import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nehari_sp.concentration import (DecayFitError, decay_fit, epsilon_scan, nonexistence_probe,
                                     periodic_centroid, periodic_radius)
from nehari_sp.fields import Field3, Grid3
from nehari_sp.landscape import ground_energy_map
from nehari_sp.potentials import PotentialError, PotentialSet
from nehari_sp.solver import SolverConfig

GRID = Grid3(64, 8.0)


@settings(max_examples=20, deadline=None)
@given(mu=st.floats(0.5, 4.0), C=st.floats(0.1, 10.0))
def test_decay_fit_recovers_exponential(mu, C):
    u = Field3(GRID, C * np.exp(-mu * GRID.radius()))
    fit = decay_fit(u, center=(0.0, 0.0, 0.0))
    assert fit.mu == pytest.approx(mu, rel=1e-3)
    assert fit.C == pytest.approx(C, rel=1e-3)
    assert fit.ok


def test_decay_fit_flags_gaussian():
    fit = decay_fit(Field3(GRID, np.exp(-0.5 * GRID.radius() ** 2)), center=(0, 0, 0))
    assert fit.fit_quality < 0.98 and not fit.ok


def test_decay_fit_errors():
    r = GRID.radius()
    with pytest.raises(DecayFitError, match="nonpositive"):
        decay_fit(Field3(GRID, np.exp(-r) * np.where(r > 3, 0.0, 1.0)), center=(0, 0, 0))
    with pytest.raises(DecayFitError):
        decay_fit(Field3(GRID, -np.ones(GRID.shape)))
    with pytest.raises(ValueError):
        decay_fit(Field3(GRID, np.exp(-r)), eps=0.0)


def test_barrier_bound():
    fit = decay_fit(Field3(GRID, np.exp(-0.5 * GRID.radius())), center=(0, 0, 0))
    assert fit.barrier_bound(1.0)
    assert not fit.barrier_bound(0.2)


def test_periodic_geometry():
    g = Grid3(32, 8.0)
    r = periodic_radius(g, (7.5, 0.0, 0.0))
    assert r[0, 16, 16] == pytest.approx(0.5)  # x = -8 wraps to 8
    c = (1.0, -2.0, 0.5)
    u = np.exp(-0.5 * periodic_radius(g, c) ** 2)
    assert np.allclose(periodic_centroid(u, g), c, atol=1e-6)
    u = np.exp(-0.5 * periodic_radius(g, (7.9, 0.0, 0.0)) ** 2)
    assert abs(abs(periodic_centroid(u, g)[0]) - 7.9) < 1e-3


def test_probe_requires_f5(single_well):
    with pytest.raises(PotentialError, match="f5"):
        nonexistence_probe(single_well, 1.0, Grid3(32, 8.0))


def test_probe_on_constants_is_indeterminate(constants):
    rep = nonexistence_probe(constants, 1.0, Grid3(32, 8.0), SolverConfig(tol=1e-9, max_iters=5))
    assert rep.runaway is None
    assert len(rep.centroid_dist) == len(rep.energies) == rep.state.iterations + 1


def test_scan_rejects_bad_lists(single_well):
    gmap = ground_energy_map(single_well, 1.0, 3)
    with pytest.raises(ValueError):
        epsilon_scan(single_well, [], SolverConfig(), Grid3(16, 8.0), gmap)
    with pytest.raises(ValueError):
        epsilon_scan(single_well, [0.5, 1.0], SolverConfig(), Grid3(16, 8.0), gmap)


@pytest.mark.slow
def test_constants_scan_marks_dist_na(tmp_path, constants):
    gmap = ground_energy_map(constants, 1.0, 1)
    scan = epsilon_scan(constants, [1.0, 0.5], SolverConfig(), GRID, gmap, k=1)
    assert not scan.dist_applicable
    assert all(math.isnan(r.dist) for r in scan.reports)
    for r in scan.reports:
        assert r.converged and r.c_eps == pytest.approx(gmap.c0, rel=2e-3)
    scan.write_csv(tmp_path / "scan.csv")
    rows = (tmp_path / "scan.csv").read_text().splitlines()
    assert rows[0].startswith("eps,c_eps,xeps_x")
    assert all(row.split(",")[5] == "n/a" for row in rows[1:])
