import math

import numpy as np
import pytest

from nehari_sp.fields import (Field3, FieldFormatError, Grid3, GridMismatchError, RadialField,
                              RadialGrid, gradient, gradient_sq_integral, h1_norm_sq,
                              inner_product, integrate, lp_norm, neg_laplacian, read_field,
                              read_header, solve_shifted_laplacian, write_field)


def gaussian(grid, center=(0.0, 0.0, 0.0), width=1.0):
    r = grid.radius(center)
    return Field3(grid, np.exp(-0.5 * (r / width) ** 2))


@pytest.mark.parametrize("n, L", [(15, 8.0), (48, 8.0), (32, 0.0), (32, -1.0), (8, 4.0)])
def test_grid_rejects_bad_shapes(n, L):
    with pytest.raises(ValueError):
        Grid3(n, L)


def test_grid_geometry():
    g = Grid3(32, 8.0)
    assert g.spacing == 0.5
    assert g.axis[0] == -8.0 and g.axis[-1] == 7.5
    assert g.index_of((7.9, -8.0, 0.0)) == (0, 0, 16)


def test_gaussian_integrals(grid32):
    u = gaussian(grid32)
    # int exp(-r^2) = pi^{3/2}, int |grad u|^2 = (3/2) pi^{3/2}
    assert integrate(u.values**2, grid32) == pytest.approx(math.pi**1.5, rel=1e-12)
    assert gradient_sq_integral(u.values, grid32) == pytest.approx(1.5 * math.pi**1.5, rel=1e-10)
    for p in (2.0, 3.0, 12 / 5):
        exact = (2 * math.pi / p) ** (1.5 / p)
        assert lp_norm(u, p) == pytest.approx(exact, rel=1e-10)
    assert h1_norm_sq(u, 2.0) == pytest.approx(3.5 * math.pi**1.5, rel=1e-10)


def test_spectral_gradient_matches_analytic(grid32):
    u = gaussian(grid32, width=1.2)
    x, _, _ = grid32.mesh()
    gx = gradient(u.values, grid32)[0]
    assert np.max(np.abs(gx + x / 1.44 * u.values)) < 1e-8


def test_nyquist_mode_carries_kinetic_energy(grid32):
    # checkerboard along x: |k|^2 = (pi/h)^2 on every node
    i = np.arange(grid32.n)
    v = np.broadcast_to(((-1.0) ** i)[:, None, None], grid32.shape).copy()
    h = grid32.spacing
    assert gradient_sq_integral(v, grid32) == pytest.approx(
        (math.pi / h) ** 2 * integrate(v * v, grid32), rel=1e-12)


def test_shifted_laplacian_inverse(grid32):
    u = gaussian(grid32).values
    back = solve_shifted_laplacian(neg_laplacian(u, grid32) + 0.7 * u, grid32, 0.7)
    assert np.max(np.abs(back - u)) < 1e-12


def test_peak_recovers_offgrid_center(grid32):
    c = (0.13, -0.31, 0.22)
    u = gaussian(grid32, center=c)
    assert np.allclose(u.peak(), c, atol=1e-10)
    assert np.allclose(u.max_point(), (0.0, -0.5, 0.0))


def test_grid_mismatch_is_rejected():
    a, b = gaussian(Grid3(16, 4.0)), gaussian(Grid3(32, 4.0))
    with pytest.raises(GridMismatchError):
        inner_product(a, b)
    with pytest.raises(GridMismatchError):
        _ = a + b


def test_h1_norm_requires_positive_v(grid32):
    with pytest.raises(ValueError):
        h1_norm_sq(gaussian(grid32), 0.0)


def test_field_roundtrip(tmp_path, grid32):
    u = gaussian(grid32, center=(1.0, 0.0, 0.0))
    path = tmp_path / "u.field"
    write_field(u, path, config_sha256="abc")
    back = read_field(path)
    assert back.grid == grid32
    assert np.array_equal(back.values, u.values)
    assert read_header(path)["config_sha256"] == "abc"

    rg = RadialGrid(128, 60.0)
    w = RadialField(rg, np.exp(-rg.r))
    write_field(w, tmp_path / "w.field")
    assert np.array_equal(read_field(tmp_path / "w.field").values, w.values)


def test_field_file_errors(tmp_path, grid32):
    path = tmp_path / "u.field"
    write_field(gaussian(grid32), path)
    data = path.read_bytes()
    (tmp_path / "short.field").write_bytes(data[:-8])
    with pytest.raises(FieldFormatError, match="payload"):
        read_field(tmp_path / "short.field")
    (tmp_path / "schema.field").write_bytes(data.replace(b"nehari-sp/1", b"nehari-sp/9", 1))
    with pytest.raises(FieldFormatError, match="schema"):
        read_field(tmp_path / "schema.field")
    (tmp_path / "nohdr.field").write_bytes(b"garbage")
    with pytest.raises(FieldFormatError):
        read_field(tmp_path / "nohdr.field")
    bad = Field3(grid32, np.full(grid32.shape, np.nan))
    with pytest.raises(ValueError):
        write_field(bad, tmp_path / "nan.field")


def test_radial_grid_constraints():
    with pytest.raises(ValueError):
        RadialGrid(1024, 20.0)
    g = RadialGrid(4096, 60.0)
    ref = g.refined_extent()
    assert ref.dr == g.dr and ref.r_max == 120.0
    # int exp(-r^2) over R^3
    assert g.integrate(np.exp(-g.r**2)) == pytest.approx(math.pi**1.5, rel=1e-9)
