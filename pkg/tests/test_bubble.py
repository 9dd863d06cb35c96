import math

import numpy as np
import pytest

from nehari_sp.bubble import (Bubble, bubble_estimates, critical_threshold, cutoff,
                              cutoff_derivative, expected_slope, gaussian_quotient,
                              sobolev_constant)

# Talenti: S = 3 (pi/2)^{4/3}, evaluated independently of the quadrature
TALENTI = 3.0 * (math.pi / 2) ** (4.0 / 3.0)


def test_sobolev_constant_oracle():
    assert sobolev_constant() == pytest.approx(TALENTI, rel=1e-10)
    assert TALENTI == pytest.approx(0.75 * (2 * math.pi**2) ** (2 / 3), rel=1e-14)


@pytest.mark.parametrize("sigma", [0.1, 0.37, 5.0])
def test_sobolev_constant_scale_invariant(sigma):
    assert sobolev_constant(sigma) == pytest.approx(sobolev_constant(1.0), rel=1e-8)


@pytest.mark.parametrize("width", [0.3, 1.0, 4.0])
def test_gaussian_quotient_exceeds_s(width):
    assert gaussian_quotient(width) > sobolev_constant()


def test_threshold_algebra():
    base = critical_threshold(1.0)
    assert base == pytest.approx(TALENTI**1.5 / 3, rel=1e-10)
    assert critical_threshold(4.0) == pytest.approx(base / 2, rel=1e-14)
    with pytest.raises(ValueError):
        critical_threshold(0.0)


def test_cutoff_shape():
    R = 2.0
    r = np.linspace(0, 5, 2001)
    xi = cutoff(r, R)
    assert np.all(xi[r <= R] == 1.0) and np.all(xi[r >= 2 * R] == 0.0)
    assert np.all(np.diff(xi) <= 0)
    mid = (r > R + 0.01) & (r < 2 * R - 0.01)
    fd = np.gradient(xi, r)
    assert np.allclose(cutoff_derivative(r, R)[mid], fd[mid], atol=2e-4)


def test_uncut_profile_solves_critical_equation():
    # -u'' - 2u'/r = u^5 for u = (3 s^2)^{1/4} (s^2 + r^2)^{-1/2}
    b = Bubble(0.7, R=1e6)
    r = np.linspace(0.1, 5.0, 50)
    h = 1e-4
    u = b.radial(r)
    upp = (b.radial(r + h) - 2 * u + b.radial(r - h)) / h**2
    lhs = -upp - 2 * b.radial_derivative(r) / r
    assert np.allclose(lhs, u**5, rtol=1e-5)


def test_bubble_energy_near_critical_value():
    S = sobolev_constant()
    b = Bubble(0.05)
    assert b.norm_power(6) == pytest.approx(S**1.5, rel=1e-5)
    assert b.grad_sq() > S**1.5
    assert b(0.0, 0.0, 0.0) == pytest.approx((3 * 0.05**2) ** 0.25 / 0.05)


def test_bubble_table_slopes():
    table = bubble_estimates([0.2, 0.1, 0.05, 0.025])
    for t, err in table.slope_errors().items():
        assert abs(err) <= 0.05, (t, err)
    assert table.l6_order >= 2.5
    assert table.grad_order == pytest.approx(1.0, abs=0.05)
    assert math.isnan(expected_slope(3.0))
    assert table.flagged == []


def test_bubble_table_validation(tmp_path):
    with pytest.raises(ValueError):
        bubble_estimates([0.1, 0.2])
    with pytest.raises(ValueError):
        bubble_estimates([0.1, -0.1])
    with pytest.raises(ValueError):
        Bubble(0.0)
    table = bubble_estimates([5.0, 1.0], R=20.0)
    assert table.flagged == [5.0]
    table.write_csv(tmp_path / "b.csv", "config_sha256=x")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "# config_sha256=x"
    assert lines[1] == "sigma,grad_sq,l6,l2,l2.5,l3,l4,l5"
