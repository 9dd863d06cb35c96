"""Potential expressions and the coefficient set ``(V, Q_1..Q_m, K, h)`` with its validators.

Expressions use a small arithmetic grammar over the coordinates ``x, y, z``:
numeric literals, ``+ - * /``, ``^`` for powers (``**`` is accepted too), and
the functions ``exp, tanh, min, max, abs``.  They are parsed with :mod:`ast`
and evaluated on numpy arrays through a whitelist.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ExpressionError(ValueError):
    pass


class PotentialError(ValueError):
    """A hypothesis on the coefficients is violated."""


_FUNCS = {
    "exp": np.exp,
    "tanh": np.tanh,
    "sqrt": np.sqrt,
    "cos": np.cos,
    "sin": np.sin,
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
}
_VARS = ("x", "y", "z")
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class Expr:
    """A compiled potential expression, callable as ``expr(x, y, z)``."""

    def __init__(self, source):
        if isinstance(source, Expr):
            source = source.source
        if isinstance(source, (int, float)) and not isinstance(source, bool):
            source = repr(float(source))
        if not isinstance(source, str) or not source.strip():
            raise ExpressionError(f"expected an expression string, got {source!r}")
        self.source = source.strip()
        try:
            # '^' is power with power precedence
            tree = ast.parse(self.source.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {self.source!r}: {exc.msg}") from None
        self._names: set[str] = set()
        self._check(tree.body)
        self._tree = tree.body
        self.constant = None if self._names else float(self._eval(self._tree, {}))

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ExpressionError(f"{self.source!r}: only numeric literals allowed")
        elif isinstance(node, ast.Name):
            if node.id not in _VARS:
                raise ExpressionError(f"{self.source!r}: unknown identifier {node.id!r}")
            self._names.add(node.id)
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"{self.source!r}: operator not allowed")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.UAdd, ast.USub)):
                raise ExpressionError(f"{self.source!r}: operator not allowed")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or node.keywords:
                raise ExpressionError(f"{self.source!r}: unknown function call")
            nargs = 2 if node.func.id in ("min", "max") else 1
            if len(node.args) != nargs:
                raise ExpressionError(
                    f"{self.source!r}: {node.func.id} takes {nargs} argument(s)")
            for a in node.args:
                self._check(a)
        else:
            raise ExpressionError(f"{self.source!r}: unsupported syntax {type(node).__name__}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        args = [self._eval(a, env) for a in node.args]
        return _FUNCS[node.func.id](*args)

    def __call__(self, x, y, z):
        x = np.asarray(x, dtype=float)
        shape = np.broadcast(x, np.asarray(y), np.asarray(z)).shape
        if self.constant is not None:
            return np.full(shape, self.constant)
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, {"x": x, "y": np.asarray(y, float),
                                           "z": np.asarray(z, float)})
        return np.broadcast_to(np.asarray(out, dtype=float), shape)

    def at(self, point) -> float:
        return float(self(*np.asarray(point, dtype=float)))

    def __repr__(self):
        return f"Expr({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, Expr) and other.source == self.source

    def __hash__(self):
        return hash(self.source)


@dataclass(frozen=True)
class Frozen:
    """Coefficients of the autonomous problem at one point (or at infinity)."""

    a: float
    b: tuple[float, ...]          # b_1..b_m then b_{m+1} = K
    q: tuple[float, ...]
    i0: int                       # 1-based pivot
    poisson_weight: float = 1.0   # h^2 multiplying the Poisson term

    def attractive(self) -> bool:
        """Whether some term able to balance the quadratic part is positive."""
        return any(bj > 0 for bj in self.b[self.i0 - 1:])


@dataclass
class Coefficients:
    """Potentials sampled on a grid at ``eps * x + shift``."""

    V: np.ndarray
    Q: list[np.ndarray]
    q: tuple[float, ...]
    i0: int
    K: np.ndarray
    h: np.ndarray | None
    V_mean: float


@dataclass(eq=False)
class PotentialSet:
    """``V``, the competing weights ``Q_i`` with exponents ``q_i``, ``K`` and ``h``.

    ``i0`` is the 1-based sign-pattern pivot: ``Q_i <= 0`` for ``i < i0`` and
    ``Q_i >= 0`` for ``i > i0``; ``Q_{i0}`` may change sign.  ``h=None`` means
    ``h = 1``.  ``x0`` is a declared point where ``K`` attains ``K_inf``.
    """

    V: Expr
    Q: Sequence[Expr]
    q: Sequence[float]
    K: Expr
    i0: int = 1
    h: Expr | None = None
    V_inf: float = math.nan
    Q_inf: Sequence[float] = ()
    K_inf: float = math.nan
    h_inf: float = 1.0
    x0: tuple[float, float, float] = (0.0, 0.0, 0.0)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.V = Expr(self.V)
        self.Q = tuple(Expr(e) for e in self.Q)
        self.q = tuple(float(v) for v in self.q)
        self.K = Expr(self.K)
        self.h = None if self.h is None else Expr(self.h)
        self.Q_inf = tuple(float(v) for v in self.Q_inf)
        self.x0 = tuple(float(v) for v in self.x0)
        self.i0 = int(self.i0)
        self._check_structure()

    @property
    def m(self) -> int:
        return len(self.Q)

    def _check_structure(self):
        if self.m == 0:
            raise PotentialError("at least one Q_i is required")
        if len(self.q) != self.m:
            raise PotentialError(f"{self.m} weights Q but {len(self.q)} exponents q")
        for i, qi in enumerate(self.q, 1):
            if not 4 < qi < 6:
                raise PotentialError(f"q_{i} = {qi} is outside (4, 6)")
        if any(b <= a for a, b in zip(self.q, self.q[1:])):
            raise PotentialError(f"exponents q must be strictly increasing, got {self.q}")
        if not 1 <= self.i0 <= self.m:
            raise PotentialError(f"pivot i0 = {self.i0} outside 1..{self.m}")
        if self.Q_inf and len(self.Q_inf) != self.m:
            raise PotentialError(f"Q_inf has {len(self.Q_inf)} entries, expected {self.m}")

    # ------------------------------------------------------------ sampling

    def frozen_at(self, s) -> Frozen:
        hs = 1.0 if self.h is None else self.h.at(s)
        b = tuple(Qi.at(s) for Qi in self.Q) + (self.K.at(s),)
        return Frozen(self.V.at(s), b, self.q, self.i0, hs * hs)

    def frozen_limit(self) -> Frozen:
        if math.isnan(self.V_inf) or math.isnan(self.K_inf) or len(self.Q_inf) != self.m:
            raise PotentialError("limits V_inf, Q_inf and K_inf must all be declared")
        h_inf = 1.0 if self.h is None else self.h_inf
        return Frozen(self.V_inf, tuple(self.Q_inf) + (self.K_inf,), self.q, self.i0,
                      h_inf * h_inf)

    def on_grid(self, grid, eps: float, shift=(0.0, 0.0, 0.0)) -> Coefficients:
        key = (grid, float(eps), tuple(float(s) for s in shift))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        x, y, z = grid.mesh()
        X, Y, Z = eps * x + shift[0], eps * y + shift[1], eps * z + shift[2]
        V = np.array(self.V(X, Y, Z))
        if np.any(V <= 0):
            raise PotentialError("V must be positive on the grid")
        coeffs = Coefficients(
            V=V,
            Q=[np.array(Qi(X, Y, Z)) for Qi in self.Q],
            q=self.q,
            i0=self.i0,
            K=np.array(self.K(X, Y, Z)),
            h=None if self.h is None else np.array(self.h(X, Y, Z)),
            V_mean=float(V.mean()),
        )
        if len(self._cache) > 8:
            self._cache.clear()
        self._cache[key] = coeffs
        return coeffs

    # ------------------------------------------------------------ hypotheses

    def validate(self, points: np.ndarray, tol: float = 1e-12) -> None:
        """Check (f2)-(f4) and the sign of ``h`` on sample points of shape (N, 3)."""
        X, Y, Z = np.asarray(points, dtype=float).T
        V = self.V(X, Y, Z)
        if not np.all(np.isfinite(V)) or V.min() <= 0:
            raise PotentialError(f"(f3) violated: inf V = {V.min():.6g} is not positive")
        for i, Qi in enumerate(self.Q, 1):
            vals = Qi(X, Y, Z)
            if not np.all(np.isfinite(vals)):
                raise PotentialError(f"Q_{i} is not finite on the sample points")
            if i < self.i0 and vals.max() > tol:
                raise PotentialError(
                    f"(f2) violated: Q_{i} must be <= 0 (i < i0 = {self.i0}), "
                    f"max {vals.max():.6g}")
            if i > self.i0 and vals.min() < -tol:
                raise PotentialError(
                    f"(f2) violated: Q_{i} must be >= 0 (i > i0 = {self.i0}), "
                    f"min {vals.min():.6g}")
        K = self.K(X, Y, Z)
        if K.min() < -tol:
            raise PotentialError(f"(f4) violated: K takes the negative value {K.min():.6g}")
        if not math.isnan(self.K_inf):
            if K.max() > self.K_inf + 1e-9:
                raise PotentialError(
                    f"(f4) violated: K reaches {K.max():.6g} > K_inf = {self.K_inf:.6g}")
            if abs(self.K.at(self.x0) - self.K_inf) > 1e-9 * max(1.0, abs(self.K_inf)):
                raise PotentialError(
                    f"(f4) violated: K(x0) = {self.K.at(self.x0):.6g} != K_inf = {self.K_inf:.6g}")
        if self.h is not None and self.h(X, Y, Z).min() < -tol:
            raise PotentialError("h must be nonnegative")

    def check_f5(self, points: np.ndarray, tol: float = 1e-9) -> None:
        """(f5): ``V >= V_inf = inf V``, ``Q_i <= Q_i^inf``, ``h = 1`` or (H1)."""
        X, Y, Z = np.asarray(points, dtype=float).T
        V = self.V(X, Y, Z)
        if V.min() < self.V_inf - tol:
            raise PotentialError(
                f"(f5) violated: V dips to {V.min():.6g} below V_inf = {self.V_inf:.6g}")
        for i, (Qi, qinf) in enumerate(zip(self.Q, self.Q_inf), 1):
            if Qi(X, Y, Z).max() > qinf + tol:
                raise PotentialError(f"(f5) violated: Q_{i} exceeds Q_{i}^inf = {qinf:.6g}")
        if self.h is not None and (self.h_inf != 0 or self.h(X, Y, Z).min() < -tol):
            raise PotentialError("(f5) violated: h must be 1 or satisfy (H1)")

    def extremes(self, points: np.ndarray) -> Frozen:
        """Lower-bound coefficients: ``inf V``, ``sup Q_i``, ``sup K``, ``inf h^2``."""
        X, Y, Z = np.asarray(points, dtype=float).T
        a = float(self.V(X, Y, Z).min())
        b = tuple(float(Qi(X, Y, Z).max()) for Qi in self.Q) + (float(self.K(X, Y, Z).max()),)
        if not math.isnan(self.V_inf):
            a = min(a, self.V_inf)
        if self.Q_inf:
            b = tuple(max(bi, qi) for bi, qi in zip(b, tuple(self.Q_inf) + (self.K_inf,)))
        pw = 1.0 if self.h is None else float(np.min(self.h(X, Y, Z)) ** 2)
        if self.h is not None:
            pw = min(pw, self.h_inf**2)
        return Frozen(a, b, self.q, self.i0, pw)

    def k_sup(self, points: np.ndarray) -> float:
        X, Y, Z = np.asarray(points, dtype=float).T
        k = float(self.K(X, Y, Z).max())
        if not math.isnan(self.K_inf):
            k = max(k, self.K_inf)
        return k


def box_points(box: float, resolution: int) -> np.ndarray:
    """``resolution^3`` points on ``[-box, box]^3`` (the center alone if resolution is 1)."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    if resolution == 1:
        return np.zeros((1, 3))
    s = np.linspace(-box, box, resolution)
    g = np.stack(np.meshgrid(s, s, s, indexing="ij"), axis=-1)
    return g.reshape(-1, 3)
