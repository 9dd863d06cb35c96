"""Sobolev constant and cut-off Aubin-Talenti bubbles.

The bubble ``u_sigma(x) = (3 sigma^2)^{1/4} / (sigma^2 + |x|^2)^{1/2}`` solves
``-Lap u = u^5`` and has ``int |grad u|^2 = int u^6 = S^{3/2}``.  All integrals
here are one-dimensional radial quadratures (``scipy.integrate.quad``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

#: Exponents ``t`` tabulated by :func:`bubble_estimates`.
NORM_EXPONENTS = (2.0, 2.5, 3.0, 4.0, 5.0)
#: Default cutoff radius; the ``t = 2.5`` slope carries an ``O(sqrt(sigma/R))`` bias.
DEFAULT_RADIUS = 20.0

_QUAD = dict(epsabs=0.0, epsrel=1e-13, limit=500)


def _profile(sigma: float, r):
    return (3.0 * sigma * sigma) ** 0.25 / np.sqrt(sigma * sigma + r * r)


def _dprofile(sigma: float, r):
    return -(3.0 * sigma * sigma) ** 0.25 * r / (sigma * sigma + r * r) ** 1.5


def _radial_integral(f, peak: float, upper: float = math.inf) -> float:
    """``4 pi int_0^upper r^2 f(r) dr`` split at the peak scale."""
    pts = [p for p in (peak, 10 * peak) if p < upper]
    total, lo = 0.0, 0.0
    for hi in pts + [upper]:
        total += quad(lambda r: r * r * f(r), lo, hi, **_QUAD)[0]
        lo = hi
    return 4.0 * math.pi * total


def rayleigh_quotient(u, du, scale: float = 1.0) -> float:
    """``int |grad u|^2 / (int u^6)^{1/3}`` for a radial profile ``u`` with derivative ``du``."""
    grad = _radial_integral(lambda r: du(r) ** 2, scale)
    l6 = _radial_integral(lambda r: u(r) ** 6, scale)
    return grad / l6 ** (1.0 / 3.0)


def sobolev_constant(sigma: float = 1.0) -> float:
    """Best constant of ``D^{1,2} -> L^6`` as the Rayleigh quotient of the uncut bubble."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return rayleigh_quotient(lambda r: _profile(sigma, r), lambda r: _dprofile(sigma, r), sigma)


def critical_threshold(k_sup: float) -> float:
    """``(1/3) S^{3/2} |K|_inf^{-1/2}``."""
    if not k_sup > 0:
        raise ValueError("threshold needs sup K > 0")
    return sobolev_constant() ** 1.5 / (3.0 * math.sqrt(k_sup))


# ---------------------------------------------------------------- cutoff

def _psi(t):
    t = np.asarray(t, dtype=float)
    return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


def cutoff(r, R: float):
    """Smooth monotone ``xi``: 1 on ``[0, R]``, 0 beyond ``2R``."""
    t = np.clip((2.0 * R - np.asarray(r, dtype=float)) / R, 0.0, 1.0)
    a, b = _psi(t), _psi(1.0 - t)
    return a / (a + b)


def cutoff_derivative(r, R: float):
    t = np.clip((2.0 * R - np.asarray(r, dtype=float)) / R, 0.0, 1.0)
    a, b = _psi(t), _psi(1.0 - t)
    inside = (t > 0) & (t < 1)
    ts = np.where(inside, t, 0.5)
    da = a / ts**2
    db = b / (1.0 - ts) ** 2
    ds = (da * b + a * db) / (a + b) ** 2
    return np.where(inside, -ds / R, 0.0)


@dataclass(frozen=True)
class Bubble:
    """Cut-off bubble ``U = xi(x - x0) u_sigma(x - x0)``."""

    sigma: float
    center: tuple = (0.0, 0.0, 0.0)
    R: float = DEFAULT_RADIUS

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.R > 0:
            raise ValueError("cutoff radius must be positive")

    def radial(self, r):
        return cutoff(r, self.R) * _profile(self.sigma, np.asarray(r, dtype=float))

    def radial_derivative(self, r):
        r = np.asarray(r, dtype=float)
        return (cutoff_derivative(r, self.R) * _profile(self.sigma, r)
                + cutoff(r, self.R) * _dprofile(self.sigma, r))

    def __call__(self, x, y, z):
        c = self.center
        return self.radial(np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2))

    def _integral(self, f) -> float:
        inner = _radial_integral(f, self.sigma, self.R)
        outer = quad(lambda r: r * r * f(r), self.R, 2 * self.R, **_QUAD)[0]
        return inner + 4.0 * math.pi * outer

    def grad_sq(self) -> float:
        return self._integral(lambda r: float(self.radial_derivative(r)) ** 2)

    def norm_power(self, t: float) -> float:
        """``|U|_t^t``."""
        return self._integral(lambda r: float(self.radial(r)) ** t)


# ---------------------------------------------------------------- estimates table

def expected_slope(t: float) -> float:
    """Log-log exponent of ``|U|_t^t`` in ``sigma``; at ``t = 3`` the local slope of
    ``sigma^{3/2} |log sigma|`` depends on sigma and is not a constant."""
    if t < 3:
        return t / 2.0
    if t > 3:
        return (6.0 - t) / 2.0
    return math.nan


@dataclass
class BubbleRow:
    sigma: float
    grad_sq: float
    l6: float
    norms: dict

    def as_list(self, exponents=NORM_EXPONENTS) -> list:
        return [self.sigma, self.grad_sq, self.l6] + [self.norms[t] for t in exponents]


@dataclass
class BubbleTable:
    rows: list
    R: float
    S: float
    slopes: dict = field(default_factory=dict)
    l6_order: float = math.nan
    grad_order: float = math.nan
    flagged: list = field(default_factory=list)

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([row.sigma for row in self.rows])

    def slope_errors(self) -> dict:
        return {t: s - expected_slope(t) for t, s in self.slopes.items() if t != 3.0}

    def write_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["sigma", "grad_sq", "l6"] + [f"l{t:g}" for t in NORM_EXPONENTS])
            for row in self.rows:
                w.writerow([repr(float(v)) for v in row.as_list()])


def _fit_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def bubble_estimates(sigmas, x0=(0.0, 0.0, 0.0), R: float = DEFAULT_RADIUS) -> BubbleTable:
    """Energy, ``L^6`` and ``L^t`` norms of cut-off bubbles with fitted scalings.

    ``slopes[t]`` is the log-log slope of ``|U|_t^t`` against sigma;
    ``l6_order``/``grad_order`` are the fitted orders of ``|int U^6 - S^{3/2}|``
    and ``int |grad U|^2 - S^{3/2}``.  Sigmas larger than ``R/10`` are flagged.
    """
    sig = np.asarray(sigmas, dtype=float)
    if sig.ndim != 1 or sig.size == 0 or np.any(sig <= 0):
        raise ValueError("sigma list must be nonempty and positive")
    if np.any(np.diff(sig) >= 0):
        raise ValueError("sigma list must be strictly decreasing")
    S = sobolev_constant()
    rows, flagged = [], []
    for s in sig:
        b = Bubble(float(s), tuple(x0), R)
        rows.append(BubbleRow(float(s), b.grad_sq(), b.norm_power(6.0),
                              {t: b.norm_power(t) for t in NORM_EXPONENTS}))
        if s > R / 10.0:
            flagged.append(float(s))
    table = BubbleTable(rows, R, S, flagged=flagged)
    if sig.size >= 2:
        for t in NORM_EXPONENTS:
            table.slopes[t] = _fit_slope(sig, [row.norms[t] for row in rows])
        target = S**1.5
        l6_err = np.abs([row.l6 - target for row in rows])
        grad_err = np.abs([row.grad_sq - target for row in rows])
        if np.all(l6_err > 0):
            table.l6_order = _fit_slope(sig, l6_err)
        if np.all(grad_err > 0):
            table.grad_order = _fit_slope(sig, grad_err)
    return table


def gaussian_quotient(width: float = 1.0) -> float:
    """Rayleigh quotient of ``exp(-r^2 / (2 width^2))`` (strictly above ``S``)."""
    return rayleigh_quotient(lambda r: math.exp(-0.5 * (r / width) ** 2),
                             lambda r: -r / width**2 * math.exp(-0.5 * (r / width) ** 2), width)
