"""Command-line driver: ``nehari-sp {solve,gmap,scan,verify,bubble,nonexist}``.

Exit codes: 0 success, 1 configuration or input error, 2 unconverged solve,
3 verification failure.  Every CSV starts with a ``# config_sha256=...``
line; JSON artifacts carry the same hash under ``config_sha256``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bubble import DEFAULT_RADIUS, bubble_estimates
from .concentration import epsilon_scan, nonexistence_probe
from .config import ConfigError, RunConfig, load_config, shipped_configs
from .fields import set_threads, write_field
from .landscape import critical_level_check, ground_energy_map
from .potentials import PotentialError
from .solver import SolverError, multistart

log = logging.getLogger("nehari_sp")

EXIT_OK, EXIT_CONFIG, EXIT_UNCONVERGED, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    """Bad command-line input; reported with exit code 1."""


# ---------------------------------------------------------------- helpers

def _resolve_config(arg: str) -> RunConfig:
    path = Path(arg)
    if not path.exists():
        shipped = shipped_configs()
        if arg in shipped:
            path = shipped[arg]
        else:
            raise ConfigError(f"{arg}: no such file (shipped configs: {', '.join(sorted(shipped))})")
    return load_config(path)


def _out_dir(args, cfg: RunConfig | None, default: str) -> Path:
    out = Path(args.out) if args.out else (cfg.out_dir if cfg else Path(default))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _json(path: Path, payload: dict) -> None:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer, np.bool_)):
            return o.item()
        raise TypeError(f"not serializable: {type(o).__name__}")

    text = json.dumps(payload, indent=2, sort_keys=True, default=default, allow_nan=True)
    path.write_text(text + "\n")


def _csv(path: Path, sha: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_sha256={sha}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def _gmap_or_none(cfg: RunConfig, threads):
    try:
        return ground_energy_map(cfg.potentials, cfg.gmap_box, cfg.gmap_resolution,
                                 grid=cfg.radial, threads=threads)
    except PotentialError as exc:
        log.warning("ground-energy map unavailable (%s); seeding at the origin", exc)
        return None


def _eps_tag(eps: float) -> str:
    return f"{eps:.6g}".replace(".", "p")


def _state_payload(gs, sha: str) -> dict:
    return {
        "config_sha256": sha,
        "eps": gs.eps,
        "energy": gs.energy,
        "breakdown": gs.breakdown.as_dict(),
        "nehari_residual": gs.nehari_residual,
        "el_residual": gs.el_residual,
        "max_point": gs.physical_max_point(),
        "positive": gs.positive,
        "converged": gs.converged,
        "status": gs.status,
        "iterations": gs.iterations,
        "multimodal": gs.multimodal,
        "shift": list(gs.shift),
    }


def _write_state(out: Path, stem: str, gs, sha: str, plots: bool = True) -> None:
    write_field(gs.u, out / f"{stem}.field", config_sha256=sha, eps=gs.eps,
                shift=list(gs.shift))
    _json(out / f"{stem}_energy.json", _state_payload(gs, sha))
    _csv(out / f"{stem}_iterations.csv", sha, ["iter", "energy", "el_residual", "step"],
         gs.log_rows())
    if plots:
        from .plotting import plot_history, plot_state
        plot_state(gs, out / f"{stem}.png")
        plot_history(gs.log_rows(), out / f"{stem}_history.png")


# ---------------------------------------------------------------- commands

def cmd_solve(args) -> int:
    cfg = _resolve_config(args.config)
    eps = args.eps if args.eps is not None else cfg.eps_list[0]
    if not eps > 0:
        raise UsageError("--eps must be positive")
    out = _out_dir(args, cfg, "out")
    gmap = _gmap_or_none(cfg, args.threads)
    gs = multistart(cfg.potentials, eps, cfg.solver, cfg.multistart, cfg.grid, gmap,
                    args.threads)
    _write_state(out, "ground_state", gs, cfg.sha256)
    print(f"eps={eps:g} energy={gs.energy:.10g} el_residual={gs.el_residual:.3g} "
          f"status={gs.status} -> {out}")
    return EXIT_OK if gs.converged else EXIT_UNCONVERGED


def cmd_gmap(args) -> int:
    cfg = _resolve_config(args.config)
    out = _out_dir(args, cfg, "out")
    P = cfg.potentials
    gmap = ground_energy_map(P, cfg.gmap_box, cfg.gmap_resolution, grid=cfg.radial,
                             threads=args.threads)
    sha = cfg.sha256
    gmap.write_csv(out / "gmap.csv", header_comment=f"config_sha256={sha}")
    try:
        ok, margin = critical_level_check(gmap, P)
    except ValueError as exc:
        ok, margin = None, math.nan
        gmap.notes.append(str(exc))
    _json(out / "verdict.json", {
        "config_sha256": sha,
        "c0": gmap.c0,
        "c_inf": gmap.c_inf,
        "argmin": gmap.argmin,
        "existence_verdict": gmap.existence_verdict,
        "critical_level_ok": ok,
        "critical_margin": margin,
        "lipschitz_estimate": gmap.lipschitz_estimate(),
        "degenerate_samples": int(gmap.degenerate.sum()),
        "notes": gmap.notes,
    })
    from .plotting import plot_gmap
    plot_gmap(gmap, out / "gmap.png")
    print(f"c0={gmap.c0:.10g} c_inf={gmap.c_inf:.10g} verdict={gmap.existence_verdict} "
          f"margin={margin:.6g} -> {out}")
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = _resolve_config(args.config)
    eps_list = [args.eps] if args.eps is not None else cfg.eps_list
    P = cfg.potentials
    gmap = ground_energy_map(P, cfg.gmap_box, cfg.gmap_resolution, grid=cfg.radial,
                             threads=args.threads)
    if not gmap.existence_verdict and not args.force:
        raise UsageError(f"existence verdict is false (c0={gmap.c0:.8g}, "
                         f"c_inf={gmap.c_inf:.8g}); rerun with --force to scan anyway")
    out = _out_dir(args, cfg, "out")
    sha = cfg.sha256
    scan = epsilon_scan(P, eps_list, cfg.solver, cfg.grid, gmap, k=cfg.multistart,
                        threads=args.threads)
    scan.write_csv(out / "scan.csv", header_comment=f"config_sha256={sha}")
    for r in scan.reports:
        _write_state(out, f"eps_{_eps_tag(r.eps)}", r.state, sha, plots=False)
    from .plotting import plot_scan
    plot_scan(scan, out / "scan.png")
    _json(out / "scan_summary.json", {
        "config_sha256": sha,
        "c0": scan.c0,
        "c_lower": scan.c_lower,
        "c_inf": scan.c_inf,
        "existence_verdict": scan.verdict,
        "energy_bounds_ok": scan.energy_bounds_ok(),
        "dist_tail_nonincreasing": scan.dist_tail_nonincreasing(),
        "profile_err_decreasing": scan.profile_err_decreasing(),
        "unconverged_eps": [r.eps for r in scan.reports if not r.converged],
    })
    for r in scan.reports:
        print(f"eps={r.eps:g} c_eps={r.c_eps:.10g} dist={r.dist:.3g} "
              f"profile_err={r.profile_err:.3g} converged={r.converged}")
    return EXIT_OK if all(r.converged for r in scan.reports) else EXIT_UNCONVERGED


def cmd_verify(args) -> int:
    from .verify import run_checks
    try:
        checks = run_checks(args.filter, report=lambda c: print(c.line(), flush=True))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    passed = all(c.passed for c in checks)
    payload = {"passed": passed, "checks": [c.as_dict() for c in checks]}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        sha = hashlib.sha256(json.dumps({"filter": args.filter}).encode()).hexdigest()
        _json(out / "verify.json", {"config_sha256": sha, **payload})
    print(f"{sum(c.passed for c in checks)}/{len(checks)} properties passed")
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_bubble(args) -> int:
    sigmas = args.sigmas
    params = {"sigmas": sigmas, "R": args.radius, "x0": [0.0, 0.0, 0.0]}
    sha = hashlib.sha256(json.dumps(params, sort_keys=True).encode()).hexdigest()
    try:
        table = bubble_estimates(sigmas, R=args.radius)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args, None, "out/bubble")
    table.write_csv(out / "bubbles.csv", header_comment=f"config_sha256={sha}")
    _json(out / "bubbles.json", {
        "config_sha256": sha, "S": table.S, "R": table.R,
        "slopes": {f"{t:g}": s for t, s in table.slopes.items()},
        "l6_order": table.l6_order, "grad_order": table.grad_order,
        "flagged_sigmas": table.flagged,
    })
    from .plotting import plot_bubbles
    plot_bubbles(table, out / "bubbles.png")
    slopes = " ".join(f"t{t:g}={s:.4f}" for t, s in table.slopes.items())
    print(f"S={table.S:.12g} l6_order={table.l6_order:.4f} slopes: {slopes} -> {out}")
    if table.flagged:
        print(f"warning: sigma > R/10 for {table.flagged}; cutoff effects dominate",
              file=sys.stderr)
    return EXIT_OK


def cmd_nonexist(args) -> int:
    cfg = _resolve_config(args.config)
    eps = args.eps if args.eps is not None else cfg.probe_eps
    out = _out_dir(args, cfg, "out")
    rep = nonexistence_probe(cfg.potentials, eps, cfg.grid, cfg.probe_solver,
                             offset=cfg.probe_offset, require_f5=not args.control,
                             width=cfg.probe_width)
    sha = cfg.sha256
    _csv(out / "probe_track.csv", sha, ["iter", "centroid_dist", "energy"],
         [(k, d, e) for k, (d, e) in enumerate(zip(rep.centroid_dist, rep.energies))])
    _json(out / "nonexist.json", {
        "config_sha256": sha, "eps": rep.eps, "c_eps": rep.c_eps, "c_inf": rep.c_inf,
        "rel_gap": rep.rel_gap, "runaway": rep.runaway, "drift_monotone": rep.drift_monotone,
        "plateau_stall": rep.plateau_stall, "converged": rep.converged,
        "final_centroid_dist": rep.centroid_dist[-1],
    })
    from .plotting import plot_probe
    plot_probe(rep, out / "probe.png")
    print(f"c_eps={rep.c_eps:.10g} c_inf={rep.c_inf:.10g} rel_gap={rep.rel_gap:.3%} "
          f"runaway={rep.runaway} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nehari-sp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True,
                           help="YAML run configuration (path or shipped name)")
        p.add_argument("--out", help="output directory (default: output.dir of the config)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $NEHARI_SP_THREADS or 1)")

    p = sub.add_parser("solve", help="ground state at one eps")
    common(p)
    p.add_argument("--eps", type=float, help="semiclassical parameter (default: first scan eps)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gmap", help="ground-energy map, limit level and verdict")
    common(p)
    p.set_defaults(func=cmd_gmap)

    p = sub.add_parser("scan", help="eps scan with concentration diagnostics")
    common(p)
    p.add_argument("--eps", type=float, help="scan this single eps instead of the list")
    p.add_argument("--force", action="store_true", help="scan even if the verdict is false")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("verify", help="run the property suite")
    common(p, config=False)
    p.add_argument("--filter", help="run only property groups whose name contains this")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bubble", help="cut-off bubble norm table")
    common(p, config=False)
    p.add_argument("--sigmas", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    p.add_argument("--radius", type=float, default=DEFAULT_RADIUS, help="cutoff radius R")
    p.set_defaults(func=cmd_bubble)

    p = sub.add_parser("nonexist", help="translation-runaway probe")
    common(p)
    p.add_argument("--eps", type=float, help="semiclassical parameter (default: probe.eps)")
    p.add_argument("--control", action="store_true",
                   help="skip the V >= V_inf precondition (control runs with a well)")
    p.set_defaults(func=cmd_nonexist)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads
    if threads is None:
        env = os.environ.get("NEHARI_SP_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                print(f"error: NEHARI_SP_THREADS={env!r} is not an integer", file=sys.stderr)
                return EXIT_CONFIG
    if threads is not None:
        if threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        set_threads(threads)
    args.threads = threads
    try:
        return args.func(args)
    except (ConfigError, UsageError, PotentialError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNCONVERGED


if __name__ == "__main__":
    sys.exit(main())
