"""Grids, scalar fields, quadrature, spectral derivatives and the binary field format.

Two discretizations live here:

* :class:`Grid3` / :class:`Field3` -- a periodic cube ``[-L, L)^3`` with ``n``
  nodes per axis and the origin on a node.  Integrals use the midpoint
  (periodic trapezoidal) rule, derivatives are spectral.
* :class:`RadialGrid` / :class:`RadialField` -- uniform nodes ``r_j = j*dr``,
  ``j = 1..n_r``, for radially symmetric states, with a Dirichlet ghost node
  just beyond ``r_max``.
"""
from __future__ import annotations

import functools
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy import fft

SCHEMA = "nehari-sp/1"

#: Bytes of working memory the solver may use; bounds the admissible grid size.
MEMORY_BUDGET_BYTES = 2**31

_workers = int(os.environ.get("NEHARI_SP_THREADS", "1") or 1)


def set_threads(n: int) -> None:
    """Set the worker count used by all FFTs."""
    global _workers
    _workers = max(1, int(n))


def fft_workers() -> int:
    return _workers


class GridMismatchError(ValueError):
    pass


class FieldFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Grid3:
    n: int
    L: float

    def __post_init__(self):
        n = int(self.n)
        if n < 16 or n & (n - 1):
            raise ValueError(f"grid n must be a power of two >= 16, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"grid half-width L must be positive, got {self.L}")
        # padded transform + ~16 working arrays
        if 8 * n**3 * 24 > MEMORY_BUDGET_BYTES:
            raise ValueError(f"grid n={n} exceeds the memory budget")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", float(self.L))

    @property
    def spacing(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.spacing * np.arange(self.n)

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return _mesh(self)

    def radius(self, center=(0.0, 0.0, 0.0)) -> np.ndarray:
        x, y, z = self.mesh()
        return np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2)

    def index_of(self, point) -> tuple[int, int, int]:
        """Nearest grid node to ``point`` (periodically wrapped)."""
        idx = np.rint((np.asarray(point, dtype=float) + self.L) / self.spacing).astype(int)
        return tuple(int(i) % self.n for i in idx)

    def zeros(self) -> "Field3":
        return Field3(self, np.zeros(self.shape))


@functools.lru_cache(maxsize=8)
def _mesh(grid: Grid3):
    x = grid.axis
    mesh = np.meshgrid(x, x, x, indexing="ij")
    for a in mesh:
        a.flags.writeable = False
    return tuple(mesh)


@functools.lru_cache(maxsize=8)
def _wavenumbers(grid: Grid3):
    """Per-axis wavenumbers (rfftn layout, Nyquist zeroed) and ``|k|^2``.

    First derivatives drop the Nyquist mode to stay real; ``|k|^2`` keeps it,
    otherwise grid-scale oscillations would carry no kinetic energy.
    """
    n, h = grid.n, grid.spacing
    k = 2 * np.pi * fft.fftfreq(n, d=h)
    kz = 2 * np.pi * fft.rfftfreq(n, d=h)
    k2 = k[:, None, None] ** 2 + k[None, :, None] ** 2 + kz[None, None, :] ** 2
    k = k.copy()
    k[n // 2] = 0.0
    kz = kz.copy()
    kz[-1] = 0.0
    k2.flags.writeable = False
    return k[:, None, None], k[None, :, None], kz[None, None, :], k2


@dataclass
class Field3:
    """Real scalar field on a :class:`Grid3`; ``values`` has shape ``(n, n, n)``.

    ``values.ravel()`` is the row-major, z-fastest order used by field files.
    """

    grid: Grid3
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            if v.size == self.grid.n**3:
                v = v.reshape(self.grid.shape)
            else:
                raise GridMismatchError(
                    f"values of shape {v.shape} do not fit grid n={self.grid.n}")
        self.values = v

    def __mul__(self, t):
        return Field3(self.grid, self.values * t)

    __rmul__ = __mul__

    def __add__(self, other: "Field3"):
        _same_grid(self, other)
        return Field3(self.grid, self.values + other.values)

    def __sub__(self, other: "Field3"):
        _same_grid(self, other)
        return Field3(self.grid, self.values - other.values)

    def __neg__(self):
        return Field3(self.grid, -self.values)

    def copy(self) -> "Field3":
        return Field3(self.grid, self.values.copy())

    def max_point(self) -> np.ndarray:
        """Coordinates of the global maximum node."""
        i = np.unravel_index(int(np.argmax(self.values)), self.grid.shape)
        return self.grid.axis[list(i)]

    def peak(self) -> np.ndarray:
        """Sub-grid maximum: per-axis parabola through the max node and its
        periodic neighbours (on ``log u`` when all three are positive)."""
        v = self.values
        n = self.grid.n
        idx = np.unravel_index(int(np.argmax(v)), v.shape)
        out = self.grid.axis[list(idx)].astype(float)
        for ax in range(3):
            lo, hi = list(idx), list(idx)
            lo[ax] = (idx[ax] - 1) % n
            hi[ax] = (idx[ax] + 1) % n
            f = np.array([v[tuple(lo)], v[idx], v[tuple(hi)]])
            if np.all(f > 0):
                f = np.log(f)
            curv = f[0] - 2 * f[1] + f[2]
            if curv < 0:
                out[ax] += 0.5 * (f[0] - f[2]) / curv * self.grid.spacing
        return out

    @classmethod
    def from_function(cls, grid: Grid3, f) -> "Field3":
        x, y, z = grid.mesh()
        return cls(grid, np.broadcast_to(f(x, y, z), grid.shape).astype(float))


def _same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def _as_values(f, grid: Grid3) -> np.ndarray:
    if isinstance(f, Field3):
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {f.grid} vs {grid}")
        return f.values
    return np.asarray(f, dtype=float)


# ---------------------------------------------------------------- quadrature

def integrate(values: np.ndarray, grid: Grid3) -> float:
    return float(np.sum(values) * grid.cell_volume)


def inner_product(a: Field3, b: Field3) -> float:
    """L^2 inner product by midpoint quadrature."""
    _same_grid(a, b)
    return float(np.vdot(a.values, b.values) * a.grid.cell_volume)


def lp_norm(u: Field3, p: float) -> float:
    if p < 1:
        raise ValueError(f"lp_norm needs p >= 1, got {p}")
    a = np.abs(u.values)
    if p == 2:
        s = np.vdot(a, a)
    else:
        s = np.sum(a**p)
    return float((s * u.grid.cell_volume) ** (1.0 / p))


# ---------------------------------------------------------------- spectral calculus

def gradient_sq_integral(values: np.ndarray, grid: Grid3) -> float:
    """``int |grad u|^2`` as a Fourier-multiplier sum (Parseval)."""
    uh = fft.rfftn(values, workers=_workers)
    k2 = _wavenumbers(grid)[3]
    w = np.abs(uh) ** 2 * k2
    # rfft halves the last axis: interior planes count twice
    n = grid.n
    total = 2.0 * w.sum() - w[..., 0].sum() - w[..., n // 2].sum()
    return float(total * grid.cell_volume / n**3)


def gradient(values: np.ndarray, grid: Grid3) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spectral gradient evaluated back in physical space."""
    uh = fft.rfftn(values, workers=_workers)
    kx, ky, kz, _ = _wavenumbers(grid)
    s = grid.shape
    return tuple(fft.irfftn(1j * k * uh, s=s, workers=_workers) for k in (kx, ky, kz))


def neg_laplacian(values: np.ndarray, grid: Grid3) -> np.ndarray:
    uh = fft.rfftn(values, workers=_workers)
    return fft.irfftn(_wavenumbers(grid)[3] * uh, s=grid.shape, workers=_workers)


def solve_shifted_laplacian(values: np.ndarray, grid: Grid3, shift: float) -> np.ndarray:
    """Apply ``(-Laplace + shift)^{-1}`` spectrally; ``shift`` must be positive."""
    uh = fft.rfftn(values, workers=_workers)
    return fft.irfftn(uh / (_wavenumbers(grid)[3] + shift), s=grid.shape, workers=_workers)


def h1_norm_sq(u: Field3, V) -> float:
    """``||u||_eps^2 = int |grad u|^2 + V u^2``.

    ``V`` is a positive :class:`Field3`, array or scalar sampled on the grid.
    """
    v = _as_values(V, u.grid)
    if np.any(v <= 0):
        raise ValueError("h1_norm_sq needs V > 0 everywhere")
    uu = u.values
    return gradient_sq_integral(uu, u.grid) + integrate(v * uu * uu, u.grid)


# ---------------------------------------------------------------- radial grids

@dataclass(frozen=True)
class RadialGrid:
    n_r: int = 4096
    r_max: float = 60.0

    def __post_init__(self):
        if int(self.n_r) < 2:
            raise ValueError("radial grid needs at least two nodes")
        if not self.r_max >= 50:
            raise ValueError(f"radial grid r_max must be >= 50, got {self.r_max}")
        object.__setattr__(self, "n_r", int(self.n_r))
        object.__setattr__(self, "r_max", float(self.r_max))

    @property
    def dr(self) -> float:
        return self.r_max / self.n_r

    @property
    def r(self) -> np.ndarray:
        return _radial_nodes(self)

    def refined_extent(self, factor: int = 2) -> "RadialGrid":
        """Same spacing, ``factor`` times the truncation radius."""
        return RadialGrid(self.n_r * factor, self.r_max * factor)

    def integrate(self, f: np.ndarray) -> float:
        """``int_{R^3} f`` for a radial integrand sampled on the nodes."""
        r = self.r
        return float(4 * np.pi * self.dr * np.dot(r * r, f))


@functools.lru_cache(maxsize=16)
def _radial_nodes(grid: RadialGrid) -> np.ndarray:
    r = grid.dr * np.arange(1, grid.n_r + 1)
    r.flags.writeable = False
    return r


@dataclass
class RadialField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_r,):
            raise GridMismatchError(
                f"radial values of shape {v.shape} do not fit n_r={self.grid.n_r}")
        self.values = v

    def __call__(self, r) -> np.ndarray:
        """Linear interpolation in r; constant extension to 0, zero beyond r_max."""
        return np.interp(r, self.grid.r, self.values, left=self.values[0], right=0.0)

    def tail_ratio(self) -> float:
        return float(abs(self.values[-1]) / np.max(np.abs(self.values)))


# ---------------------------------------------------------------- field files

AnyField = Union[Field3, RadialField]


def write_field(field: AnyField, path, name: str = "u", **extra) -> None:
    """Write a JSON header line followed by raw little-endian float64 values."""
    values = np.ascontiguousarray(field.values, dtype="<f8").ravel()
    if not np.all(np.isfinite(values)):
        raise ValueError("refusing to write non-finite field values")
    if isinstance(field, Field3):
        header = {"schema": SCHEMA, "kind": "field3", "n": field.grid.n,
                  "L": field.grid.L, "name": name}
    else:
        header = {"schema": SCHEMA, "kind": "radial", "n_r": field.grid.n_r,
                  "r_max": field.grid.r_max, "name": name}
    header.update(extra)
    with open(Path(path), "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(values.tobytes())


def read_field(path) -> AnyField:
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise FieldFormatError(f"{path}: missing header line")
    try:
        header = json.loads(data[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FieldFormatError(f"{path}: malformed header: {exc}") from None
    if not isinstance(header, dict):
        raise FieldFormatError(f"{path}: malformed header")
    if header.get("schema") != SCHEMA:
        raise FieldFormatError(f"{path}: schema {header.get('schema')!r} != {SCHEMA!r}")
    payload = data[nl + 1:]
    kind = header.get("kind")
    try:
        if kind == "field3":
            grid = Grid3(header["n"], header["L"])
            count = grid.n**3
        elif kind == "radial":
            grid = RadialGrid(header["n_r"], header["r_max"])
            count = grid.n_r
        else:
            raise FieldFormatError(f"{path}: unknown kind {kind!r}")
    except KeyError as exc:
        raise FieldFormatError(f"{path}: header lacks {exc}") from None
    if len(payload) != 8 * count:
        raise FieldFormatError(
            f"{path}: payload has {len(payload)} bytes, header declares {count} values")
    values = np.frombuffer(payload, dtype="<f8").astype(float)
    if kind == "field3":
        return Field3(grid, values.reshape(grid.shape))
    return RadialField(grid, values)


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        return json.loads(fh.readline().decode("utf-8"))
