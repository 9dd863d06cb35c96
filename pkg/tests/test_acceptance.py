"""Acceptance suite: one pass/fail line per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they are
produced; they are repeated in the terminal summary either way.
"""
import math
import time

import numpy as np
import pytest

from nehari_sp import verify
from nehari_sp.cli import main
from nehari_sp.concentration import decay_fit, epsilon_scan, nonexistence_probe
from nehari_sp.config import load_config, shipped_configs
from nehari_sp.fields import Field3
from nehari_sp.functional import GridProblem, ray_argmax
from nehari_sp.landscape import ground_energy_map

pytestmark = pytest.mark.slow


def _summary(checks):
    return "; ".join(f"{c.name}={c.value:.3g}" for c in checks)


def _record(acceptance_line, number, checks):
    passed = all(c.passed for c in checks)
    acceptance_line(number, passed, _summary(checks))
    failed = [c.line() for c in checks if not c.passed]
    assert passed, "\n".join(failed)


@pytest.fixture(scope="module")
def lattice():
    return verify._lattice()


@pytest.fixture(scope="module")
def single_well_scan():
    cfg = load_config(shipped_configs()["single_well"])
    P = cfg.potentials
    t0 = time.perf_counter()
    gmap = ground_energy_map(P, cfg.gmap_box, cfg.gmap_resolution, grid=cfg.radial)
    scan = epsilon_scan(P, [1.0, 0.5, 0.25, 0.125], cfg.solver, cfg.grid, gmap,
                        k=cfg.multistart)
    return cfg, gmap, scan, time.perf_counter() - t0


def test_criterion_01_poisson_oracle(acceptance_line):
    _record(acceptance_line, 1, verify.check_poisson())


def test_criterion_02_scalings(acceptance_line):
    _record(acceptance_line, 2, verify.check_scalings(10))


def test_criterion_03_nehari_projection(acceptance_line):
    _record(acceptance_line, 3, verify.check_nehari(100))


def test_criterion_04_ray_argmax(acceptance_line, lattice, single_well_scan):
    checks = verify.check_ray(lattice)
    cfg, _, scan, _ = single_well_scan
    worst = 0.0
    for r in scan.converged():
        gs = r.state
        ray, _ = GridProblem.build(cfg.potentials, gs.u.grid, gs.eps, gs.shift).ray(gs.u.values)
        worst = max(worst, abs(ray_argmax(ray) - 1.0))
    checks.append(verify._check("ray", "scan_states", worst, 1e-6))
    _record(acceptance_line, 4, checks)


def test_criterion_05_monotonicity(acceptance_line, lattice):
    _record(acceptance_line, 5, verify.check_monotonicity(lattice))


def test_criterion_06_sobolev(acceptance_line):
    _record(acceptance_line, 6, verify.check_sobolev())


def test_criterion_07_bubble_table(acceptance_line):
    _record(acceptance_line, 7, verify.check_bubbles())


def test_criterion_08_critical_margin(acceptance_line):
    _record(acceptance_line, 8, verify.check_margin())


def test_criterion_09_concentration(acceptance_line, single_well_scan):
    cfg, gmap, scan, elapsed = single_well_scan
    last = scan.reports[-1]
    cell = 2 * cfg.grid.spacing * last.eps
    rel = abs(last.c_eps - gmap.c0) / gmap.c0
    errs = [r.profile_err for r in scan.reports]
    passed = (all(r.converged for r in scan.reports) and last.dist <= cell and rel <= 0.05
              and scan.profile_err_decreasing() and elapsed < 1800)
    acceptance_line(9, passed, f"dist={last.dist:.3g} (<= {cell:.3g}) c_rel={rel:.3%} "
                    f"profile_err={[round(e, 4) for e in errs]} runtime={elapsed:.0f}s")
    assert passed


def test_criterion_10_decay(acceptance_line, single_well_scan):
    cfg, _, scan, _ = single_well_scan
    last = scan.reports[-1]
    fit = decay_fit(last.state.u, eps=last.eps)
    v0 = cfg.potentials.V.at(last.x_eps)
    grid = cfg.grid
    r = grid.radius()
    synth = max(abs(decay_fit(Field3(grid, np.exp(-mu * r)), center=(0, 0, 0)).mu - mu) / mu
                for mu in (0.5, 1.0, 2.0, 4.0))
    bound = 0.5 * v0 + 1e-2
    passed = fit.ok and fit.mu**2 <= bound and synth <= 1e-3
    acceptance_line(10, passed, f"mu={fit.mu:.4g} R2={fit.fit_quality:.4f} "
                    f"mu^2={fit.mu ** 2:.4g} (<= {bound:.4g}) synthetic_rel={synth:.2e}")
    assert passed


def test_criterion_11_nonexistence(acceptance_line):
    paths = shipped_configs()
    bump = load_config(paths["bump"])
    well = load_config(paths["well_control"])
    rb = nonexistence_probe(bump.potentials, bump.probe_eps, bump.grid, bump.probe_solver,
                            offset=bump.probe_offset, width=bump.probe_width)
    rw = nonexistence_probe(well.potentials, well.probe_eps, well.grid, well.probe_solver,
                            offset=well.probe_offset, require_f5=False, width=well.probe_width)
    passed = (rb.rel_gap <= 0.03 and rb.runaway is True and rw.runaway is False
              and rw.c_eps < rw.c_inf - 1e-6)
    acceptance_line(11, passed, f"bump rel_gap={rb.rel_gap:.3%} runaway={rb.runaway}; "
                    f"control runaway={rw.runaway} c_inf-c_eps={rw.c_inf - rw.c_eps:.3g}")
    assert passed


def test_criterion_12_verify_end_to_end(acceptance_line, capsys):
    t0 = time.perf_counter()
    code = main(["verify"])
    elapsed = time.perf_counter() - t0
    out = capsys.readouterr().out
    groups = {line.split()[1].split("/")[0] for line in out.splitlines()
              if line.startswith(("PASS", "FAIL"))}
    passed = code == 0 and elapsed <= 600 and set(verify.GROUPS) <= groups
    acceptance_line(12, passed, f"exit={code} runtime={elapsed:.0f}s groups={len(groups)}")
    assert passed
    assert not math.isnan(elapsed)
