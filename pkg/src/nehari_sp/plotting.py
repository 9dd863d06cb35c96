"""PNG figures written next to the CSV/JSON artifacts (headless Agg backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bubble import NORM_EXPONENTS  # noqa: E402


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_state(gs, path, title: str = "") -> None:
    """Central slice of a 3D state through its maximum, plus the line profile."""
    u = gs.u
    g = u.grid
    i, j, k = np.unravel_index(int(np.argmax(u.values)), g.shape)
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    ext = (-g.L, g.L - g.spacing, -g.L, g.L - g.spacing)
    im = ax0.imshow(u.values[:, :, k].T, origin="lower", extent=ext, cmap="viridis")
    fig.colorbar(im, ax=ax0, label="u")
    ax0.set_xlabel("x (rescaled)")
    ax0.set_ylabel("y (rescaled)")
    ax0.set_title(title or "ground state, z slice through the maximum")
    ax1.semilogy(g.axis, np.maximum(u.values[:, j, k], 1e-300))
    ax1.set_xlabel("x (rescaled)")
    ax1.set_ylabel("u along x")
    ax1.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def plot_history(rows, path) -> None:
    """Energy gap and Euler-Lagrange residual per iteration."""
    rows = np.asarray(rows, dtype=float)
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    e = rows[:, 1]
    gap = e - e.min()
    ax0.semilogy(rows[:, 0], np.where(gap > 0, gap, np.nan), ".-")
    ax0.set_xlabel("iteration")
    ax0.set_ylabel("energy - final energy")
    ax1.semilogy(rows[:, 0], rows[:, 2], ".-")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("EL residual")
    for ax in (ax0, ax1):
        ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def plot_gmap(gmap, path) -> None:
    """G on the sample plane through the minimizer, and along the x line."""
    pts, vals = gmap.points, gmap.values
    z0 = gmap.argmin[0][2] if len(gmap.argmin) else 0.0
    sel = np.isclose(pts[:, 2], z0)
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    sc = ax0.scatter(pts[sel, 0], pts[sel, 1], c=vals[sel], cmap="magma", s=60)
    fig.colorbar(sc, ax=ax0, label="G(s)")
    if len(gmap.argmin):
        ax0.plot(gmap.argmin[:, 0], gmap.argmin[:, 1], "c+", ms=12, label="argmin set")
        ax0.legend(loc="upper right")
    ax0.set_xlabel("s_x")
    ax0.set_ylabel("s_y")
    ax0.set_title(f"z = {z0:g}")
    y0 = gmap.argmin[0][1] if len(gmap.argmin) else 0.0
    line = sel & np.isclose(pts[:, 1], y0)
    order = np.argsort(pts[line, 0])
    ax1.plot(pts[line, 0][order], vals[line][order], "o-", label="G")
    if np.isfinite(gmap.c_inf):
        ax1.axhline(gmap.c_inf, color="k", ls="--", label="c_inf")
    ax1.axhline(gmap.c0, color="r", ls=":", label="c0")
    ax1.set_xlabel("s_x")
    ax1.legend()
    _save(fig, path)


def plot_scan(scan, path) -> None:
    eps = np.array([r.eps for r in scan.reports])
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    axes[0].semilogx(eps, [r.c_eps for r in scan.reports], "o-", label="c_eps")
    axes[0].axhline(scan.c0, color="r", ls=":", label="c0")
    axes[0].axhline(scan.c_lower, color="g", ls="--", label="lower floor")
    axes[0].set_ylabel("energy")
    axes[0].legend()
    if scan.dist_applicable:
        d = np.array([r.dist for r in scan.reports])
        axes[1].loglog(eps, np.maximum(d, 1e-16), "o-")
    axes[1].set_ylabel("dist(x_eps, argmin set)")
    axes[2].loglog(eps, [r.profile_err for r in scan.reports], "o-")
    axes[2].set_ylabel("rescaled profile L2 error")
    for ax in axes:
        ax.set_xlabel("eps")
        ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def plot_bubbles(table, path) -> None:
    s = table.sigmas
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    for t in NORM_EXPONENTS:
        ax0.loglog(s, [row.norms[t] for row in table.rows], "o-", label=f"t = {t:g}")
    ax0.set_xlabel("sigma")
    ax0.set_ylabel("|U|_t^t")
    ax0.legend()
    target = table.S**1.5
    ax1.loglog(s, [abs(row.l6 - target) for row in table.rows], "o-", label="|int U^6 - S^1.5|")
    ax1.loglog(s, [abs(row.grad_sq - target) for row in table.rows], "s-",
               label="int |grad U|^2 - S^1.5")
    ax1.set_xlabel("sigma")
    ax1.legend()
    for ax in (ax0, ax1):
        ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def plot_probe(report, path) -> None:
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    ax0.plot(report.centroid_dist, ".-")
    ax0.set_xlabel("iteration")
    ax0.set_ylabel("|centroid| (rescaled)")
    ax1.plot(report.energies, ".-", label="energy")
    ax1.axhline(report.c_inf, color="k", ls="--", label="c_inf")
    ax1.set_xlabel("iteration")
    ax1.legend()
    for ax in (ax0, ax1):
        ax.grid(True, alpha=0.3)
    _save(fig, path)
