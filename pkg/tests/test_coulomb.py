import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from nehari_sp import coulomb
from nehari_sp.fields import Field3, Grid3, RadialField, RadialGrid
from nehari_sp.verify import random_fields


def erf_oracle(r):
    """1/|x| * exp(-|x|^2) = pi^{3/2} erf(r) / r."""
    safe = np.where(r > 0, r, 1.0)
    return np.where(r > 0, math.pi**1.5 * erf(safe) / safe, 2 * math.pi)


def test_gaussian_oracle_coarse():
    g = Grid3(32, 8.0)
    u = Field3(g, np.exp(-0.5 * g.radius() ** 2))
    phi = coulomb.coulomb_potential(u).values
    r = g.radius()
    sel = r < g.L / 2
    assert np.max(np.abs(phi[sel] / erf_oracle(r[sel]) - 1)) < 5e-3


def test_far_field_is_free_space():
    # no periodic images: near the box face the potential still follows the monopole
    g = Grid3(64, 12.0)
    u = Field3(g, np.exp(-0.5 * g.radius() ** 2))
    phi = coulomb.coulomb_potential(u).values
    i = g.index_of((10.0, 0.0, 0.0))
    x = g.axis[i[0]]
    assert phi[i] == pytest.approx(math.pi**1.5 / x, rel=1e-4)


def test_weight_h_enters_density(grid32):
    u = Field3(grid32, np.exp(-0.5 * grid32.radius() ** 2))
    phi1 = coulomb.coulomb_potential(u).values
    phi2 = coulomb.coulomb_potential(u, np.full(grid32.shape, 0.25)).values
    assert np.allclose(phi2, 0.25 * phi1, rtol=1e-13, atol=0)
    with pytest.raises(ValueError):
        coulomb.coulomb_potential(u, -np.ones(grid32.shape))


@settings(max_examples=15, deadline=None)
@given(t=st.floats(0.05, 20.0), seed=st.integers(0, 10**6))
def test_scaling_laws(t, seed):
    g = Grid3(16, 6.0)
    (u,) = random_fields(g, 1, seed=seed)
    phi = coulomb.coulomb_potential(u).values
    assert np.allclose(coulomb.coulomb_potential(u * t).values, t * t * phi, rtol=1e-11, atol=0)
    e = coulomb.coulomb_energy(u)
    assert coulomb.coulomb_energy(u * t) == pytest.approx(t**4 * e, rel=1e-11)


def test_bilinear_symmetric_and_positive(grid32):
    f, g = (Field3(grid32, v.values**2) for v in random_fields(grid32, 2, seed=5))
    assert coulomb.bilinear(f, g) == pytest.approx(coulomb.bilinear(g, f), rel=1e-12)
    assert coulomb.bilinear(f, f) > 0


def test_bound_inequality_on_random_fields(grid32):
    for u in random_fields(grid32, 5, seed=7):
        lhs, rhs = coulomb.coulomb_bound_check(u)
        assert 0 < lhs <= rhs


def test_radial_potential_matches_oracle():
    g = RadialGrid(4096, 60.0)
    u = RadialField(g, np.exp(-0.5 * g.r**2))
    phi = coulomb.radial_coulomb(u).values
    sel = g.r < 10
    assert np.max(np.abs(phi[sel] / erf_oracle(g.r[sel]) - 1)) < 1e-3
