"""Run configuration: a YAML document with line- and field-addressed errors.

Layout::

    grid:       {n: 64, L: 8.0}
    radial:     {n_r: 4096, r_max: 60.0}
    potentials:
      V: "1 - 0.5*exp(-(x^2+y^2+z^2))"
      Q: [{expr: "100", q: 4.2}]
      i0: 1
      K: "1"
      h: null
      x0: [0, 0, 0]
      limits: {V_inf: 1, Q_inf: [100], K_inf: 1, h_inf: 1}
    solver:     {tol: 1.0e-6, max_iters: 3000, restarts: 2, multistart: 2}
    scan:       {eps_list: [1, 0.5, 0.25, 0.125]}
    gmap:       {box: 2.0, resolution: 9}
    probe:      {eps: 1.0, offset: [1, 0, 0], max_iters: 150}
    output:     {dir: out}

Every section except ``potentials`` is optional.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .fields import Grid3, RadialGrid
from .potentials import ExpressionError, PotentialError, PotentialSet, box_points
from .solver import SolverConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the field and, when known, the line."""


_SECTIONS = {
    "grid": {"n", "L"},
    "radial": {"n_r", "r_max"},
    "potentials": {"V", "Q", "i0", "K", "h", "x0", "limits"},
    "solver": {"tol", "max_iters", "restarts", "multistart", "method", "step", "stall_tol",
               "preconditioner"},
    "scan": {"eps_list"},
    "gmap": {"box", "resolution"},
    "probe": {"eps", "offset", "max_iters", "tol", "width"},
    "output": {"dir"},
}
_LIMIT_KEYS = {"V_inf", "Q_inf", "K_inf", "h_inf"}


def _to_python(node, path: str, lines: dict):
    """Convert a composed YAML node, recording the 1-based line of every path."""
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            key = key_node.value
            if key in out:
                raise ConfigError(f"line {key_node.start_mark.line + 1}: duplicate key "
                                  f"'{_join(path, key)}'")
            out[key] = _to_python(value_node, _join(path, key), lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_to_python(v, f"{path}[{i}]", lines) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def _join(path: str, key) -> str:
    return f"{path}.{key}" if path else str(key)


@dataclass
class RunConfig:
    grid: Grid3
    radial: RadialGrid
    potentials: PotentialSet
    solver: SolverConfig
    multistart: int
    eps_list: list
    gmap_box: float
    gmap_resolution: int
    probe_eps: float
    probe_offset: tuple
    probe_solver: SolverConfig
    probe_width: float
    out_dir: Path
    raw: dict = field(repr=False, default_factory=dict)
    source: str = ""

    @property
    def sha256(self) -> str:
        """Hash of the canonical parsed document (formatting and comments ignored)."""
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def sample_points(self) -> np.ndarray:
        return box_points(self.gmap_box, self.gmap_resolution)


class _Reader:
    def __init__(self, doc: dict, lines: dict, source: str):
        self.doc, self.lines, self.source = doc, lines, source

    def fail(self, path: str, msg: str):
        where = path
        line = None
        probe = path
        while probe and line is None:
            line = self.lines.get(probe)
            probe = probe.rsplit(".", 1)[0] if "." in probe else ""
        prefix = f"{self.source}:" if self.source else ""
        loc = f"{prefix}line {line}: " if line else prefix
        raise ConfigError(f"{loc}field '{where}': {msg}")

    def section(self, name: str, required: bool = False) -> dict:
        sec = self.doc.get(name)
        if sec is None:
            if required:
                self.fail(name, "section is required")
            return {}
        if not isinstance(sec, dict):
            self.fail(name, "must be a mapping")
        for key in sec:
            if key not in _SECTIONS[name]:
                self.fail(f"{name}.{key}", "unknown key")
        return sec

    def number(self, path: str, value, *, integer: bool = False, positive: bool = False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        if integer and (not float(value).is_integer()):
            self.fail(path, f"expected an integer, got {value!r}")
        if not math.isfinite(value):
            self.fail(path, "must be finite")
        if positive and not value > 0:
            self.fail(path, f"must be positive, got {value!r}")
        return int(value) if integer else float(value)

    def get(self, sec: dict, name: str, key: str, default, **kw):
        if key not in sec:
            return default
        return self.number(f"{name}.{key}", sec[key], **kw)

    def expr(self, path: str, value) -> str:
        if isinstance(value, bool) or not isinstance(value, (str, int, float)):
            self.fail(path, f"expected an expression string, got {value!r}")
        return str(value)

    def vector(self, path: str, value) -> tuple:
        if not isinstance(value, list) or len(value) != 3:
            self.fail(path, "expected a list of three numbers")
        return tuple(self.number(f"{path}[{i}]", v) for i, v in enumerate(value))


def _potentials(rd: _Reader) -> PotentialSet:
    sec = rd.section("potentials", required=True)
    for key in ("V", "Q", "K"):
        if key not in sec:
            rd.fail(f"potentials.{key}", "is required")
    V = rd.expr("potentials.V", sec["V"])
    K = rd.expr("potentials.K", sec["K"])
    h = None if sec.get("h") is None else rd.expr("potentials.h", sec["h"])
    Q_list = sec["Q"]
    if not isinstance(Q_list, list) or not Q_list:
        rd.fail("potentials.Q", "expected a nonempty list of {expr, q}")
    Q, q = [], []
    for i, item in enumerate(Q_list):
        path = f"potentials.Q[{i}]"
        if not isinstance(item, dict) or set(item) != {"expr", "q"}:
            rd.fail(path, "expected a mapping with keys 'expr' and 'q'")
        Q.append(rd.expr(f"{path}.expr", item["expr"]))
        qi = rd.number(f"{path}.q", item["q"])
        if not 4 < qi < 6:
            rd.fail(f"{path}.q", f"q = {qi} is outside (4, 6)")
        q.append(qi)
    if any(b <= a for a, b in zip(q, q[1:])):
        rd.fail("potentials.Q", f"exponents must be strictly increasing, got {q}")
    i0 = rd.get(sec, "potentials", "i0", 1, integer=True)
    x0 = rd.vector("potentials.x0", sec["x0"]) if "x0" in sec else (0.0, 0.0, 0.0)
    lim = sec.get("limits") or {}
    if not isinstance(lim, dict):
        rd.fail("potentials.limits", "must be a mapping")
    for key in lim:
        if key not in _LIMIT_KEYS:
            rd.fail(f"potentials.limits.{key}", "unknown key")
    V_inf = rd.get(lim, "potentials.limits", "V_inf", math.nan)
    K_inf = rd.get(lim, "potentials.limits", "K_inf", math.nan)
    h_inf = rd.get(lim, "potentials.limits", "h_inf", 1.0)
    Q_inf = ()
    if "Q_inf" in lim:
        if not isinstance(lim["Q_inf"], list) or len(lim["Q_inf"]) != len(Q):
            rd.fail("potentials.limits.Q_inf", f"expected a list of {len(Q)} numbers")
        Q_inf = tuple(rd.number(f"potentials.limits.Q_inf[{i}]", v)
                      for i, v in enumerate(lim["Q_inf"]))
    try:
        return PotentialSet(V=V, Q=Q, q=q, K=K, i0=i0, h=h, V_inf=V_inf, Q_inf=Q_inf,
                            K_inf=K_inf, h_inf=h_inf, x0=x0)
    except ExpressionError as exc:
        rd.fail("potentials", f"bad expression: {exc}")
    except PotentialError as exc:
        rd.fail("potentials", str(exc))


def _solver(rd: _Reader, sec: dict, name: str, base: SolverConfig) -> SolverConfig:
    kw = {}
    for key, kind in (("tol", "pos"), ("stall_tol", "pos"), ("step", "pos"),
                      ("max_iters", "int"), ("restarts", "int")):
        if key in sec:
            kw[key] = rd.number(f"{name}.{key}", sec[key], integer=kind == "int",
                                positive=True)
    for key in ("method", "preconditioner"):
        if key in sec:
            kw[key] = str(sec[key])
    try:
        return SolverConfig(**{**base.__dict__, **kw})
    except ValueError as exc:
        rd.fail(name, str(exc))


def parse_config(text: str, source: str = "", base_dir: Path | None = None) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark else ""
        raise ConfigError(f"{source + ':' if source else ''}{where}malformed YAML: "
                          f"{getattr(exc, 'problem', exc)}") from None
    if node is None:
        raise ConfigError(f"{source + ':' if source else ''}empty configuration")
    lines: dict = {}
    doc = _to_python(node, "", lines)
    rd = _Reader(doc, lines, source)
    if not isinstance(doc, dict):
        rd.fail("", "top level must be a mapping")
    for key in doc:
        if key not in _SECTIONS:
            rd.fail(key, "unknown section")

    g = rd.section("grid")
    n = rd.get(g, "grid", "n", 64, integer=True, positive=True)
    L = rd.get(g, "grid", "L", 8.0, positive=True)
    try:
        grid = Grid3(n, L)
    except ValueError as exc:
        rd.fail("grid", str(exc))
    r = rd.section("radial")
    try:
        radial = RadialGrid(rd.get(r, "radial", "n_r", 4096, integer=True, positive=True),
                            rd.get(r, "radial", "r_max", 60.0, positive=True))
    except ValueError as exc:
        rd.fail("radial", str(exc))

    P = _potentials(rd)

    s = rd.section("solver")
    solver = _solver(rd, s, "solver", SolverConfig())
    multistart = rd.get(s, "solver", "multistart", 2, integer=True, positive=True)

    sc = rd.section("scan")
    eps_list = sc.get("eps_list", [1.0, 0.5, 0.25, 0.125])
    if not isinstance(eps_list, list):
        rd.fail("scan.eps_list", "expected a list")
    if not eps_list:
        rd.fail("scan.eps_list", "must not be empty")
    eps_list = [rd.number(f"scan.eps_list[{i}]", e, positive=True)
                for i, e in enumerate(eps_list)]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        rd.fail("scan.eps_list", "must be strictly decreasing")

    gm = rd.section("gmap")
    box = rd.get(gm, "gmap", "box", 2.0, positive=True)
    res = rd.get(gm, "gmap", "resolution", 9, integer=True, positive=True)

    pr = rd.section("probe")
    probe_eps = rd.get(pr, "probe", "eps", 1.0, positive=True)
    offset = rd.vector("probe.offset", pr["offset"]) if "offset" in pr else (1.0, 0.0, 0.0)
    probe_solver = _solver(rd, pr, "probe", SolverConfig(tol=1e-9, max_iters=150))
    width = rd.get(pr, "probe", "width", 1.5, positive=True)

    o = rd.section("output")
    out = Path(str(o.get("dir", "out")))
    if base_dir is not None and not out.is_absolute():
        out = base_dir / out

    # hypotheses re-validated on the sampling box
    try:
        P.validate(box_points(box, max(res, 2)))
    except PotentialError as exc:
        rd.fail("potentials", str(exc))

    return RunConfig(grid, radial, P, solver, multistart, eps_list, box, res, probe_eps,
                     offset, probe_solver, width, out, raw=doc, source=source)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    return parse_config(text, str(path), base_dir=None)


def shipped_configs() -> dict:
    """Names and paths of the example configurations bundled with the package."""
    root = resources.files("nehari_sp") / "configs"
    return {p.name[:-5]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".yaml")}
