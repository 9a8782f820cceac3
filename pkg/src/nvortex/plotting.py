"""Figures for the command-line reports.

matplotlib is imported lazily so that the numerical core never pulls in a
graphics stack.  Every figure function takes an output path, renders with
the Agg backend under a fixed style, and returns that path.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from pathlib import Path

import numpy as np

STYLE = {
    "figure.figsize": (5.0, 4.0),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "svg.hashsalt": "nvortex",
}


@contextmanager
def _figure(path, **subplot_kw):
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(**subplot_kw)
        try:
            yield fig, ax
            fig.tight_layout()
            # no timestamps or versions embedded, so reruns stay identical
            fig.savefig(Path(path), metadata={"Software": None})
        finally:
            plt.close(fig)


def _draw_boundary(ax, domain, extent: float) -> None:
    if domain.kind == "unit_disc":
        t = np.linspace(0.0, 2 * math.pi, 400)
        ax.plot(np.cos(t), np.sin(t), color="0.3", lw=0.8)
    elif domain.kind == "half_plane":
        ax.axhline(0.0, color="0.3", lw=0.8)
    elif domain.kind == "annulus":
        t = np.linspace(0.0, 2 * math.pi, 400)
        for radius in (domain.rho, 1.0):
            ax.plot(radius * np.cos(t), radius * np.sin(t), color="0.3", lw=0.8)


def plot_trajectory(traj, path, domain=None):
    """Vortex tracks in the plane."""
    states = np.asarray(traj.states)
    n = states.shape[1] // 2
    with _figure(path) as (_, ax):
        for k in range(n):
            ax.plot(states[:, 2 * k], states[:, 2 * k + 1], label=f"vortex {k + 1}")
            ax.plot(states[0, 2 * k], states[0, 2 * k + 1], "o", ms=3, color=ax.lines[-1].get_color())
        if domain is not None:
            _draw_boundary(ax, domain, float(np.max(np.abs(states))))
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        if n <= 8:
            ax.legend(loc="best")
    return path


def plot_spectrum(eigenvalues, omega: float, path):
    """Stability-matrix eigenvalues with the resonance lattice ``i|ω|ℤ``."""
    ev = np.asarray(eigenvalues, dtype=complex)
    top = max(float(np.max(np.abs(ev.imag))) if ev.size else 1.0, abs(omega)) * 1.2
    with _figure(path) as (_, ax):
        for j in range(-int(top / abs(omega)) - 1, int(top / abs(omega)) + 2):
            ax.axhline(j * abs(omega), color="0.8", lw=0.6, zorder=0)
        ax.plot(ev.real, ev.imag, "x", color="C3")
        ax.set_xlabel("Re λ")
        ax.set_ylabel("Im λ")
        ax.set_title(f"stability spectrum (|ω| = {abs(omega):.4g})")
    return path


def plot_robin(domain, reports, path, samples: int = 161):
    """Robin function on a grid with its critical points marked."""
    with _figure(path) as (_, ax):
        if domain.kind == "half_plane":
            xs, ys = np.linspace(-1.0, 1.0, samples), np.linspace(0.02, 2.0, samples)
        else:
            xs = ys = np.linspace(-0.98, 0.98, samples)
        X, Y = np.meshgrid(xs, ys)
        pts = np.stack([X, Y], axis=-1)
        inside = domain.contains(pts)
        H = np.full(X.shape, np.nan)
        H[inside] = domain.g(pts[inside], pts[inside])
        # h blows up at the wall; clip so the interior structure stays visible
        top = float(np.nanpercentile(H, 90))
        mesh = ax.contourf(X, Y, np.minimum(H, top), levels=np.linspace(np.nanmin(H), top, 25), cmap="viridis")
        ax.figure.colorbar(mesh, ax=ax, label="h")
        _draw_boundary(ax, domain, 1.0)
        for rep in reports:
            ax.plot(*rep.location, "r+", ms=10)
        ax.set_aspect("equal")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    return path


def plot_loop(loop, path, r: float | None = None, a0=None, domain=None):
    """A periodic loop, in scaled coordinates or mapped by ``a0 + r u``."""
    t = np.linspace(0.0, 2 * math.pi, 400)
    vals = loop(t).reshape(len(t), -1, 2)
    if r is not None:
        anchor = np.zeros(2) if a0 is None else np.asarray(a0, dtype=float)
        vals = anchor + r * vals
    with _figure(path) as (_, ax):
        for k in range(vals.shape[1]):
            ax.plot(vals[:, k, 0], vals[:, k, 1], label=f"vortex {k + 1}")
            ax.plot(vals[0, k, 0], vals[0, k, 1], "o", ms=3, color=ax.lines[-1].get_color())
        if domain is not None and r is not None:
            _draw_boundary(ax, domain, 1.0)
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    return path


def plot_branch(branch, path):
    """Branch diagnostics against ``r`` on logarithmic axes."""
    radii = branch.radii
    with _figure(path, ncols=2, figsize=(9.0, 3.8)) as (_, axes):
        left, right = axes
        dist = np.array([p.orbit_distance for p in branch.points])
        trans = np.array([p.translation_size for p in branch.points])
        for values, label in ((dist, "dist(v, S¹Z)"), (trans, "r |P_D u|")):
            shown = values > 0
            if shown.any():
                left.loglog(radii[shown], values[shown], ".-", label=label)
            else:
                left.plot([], [], label=f"{label} ≡ 0")
        left.set_xscale("log")
        left.set_xlabel("r")
        left.legend(loc="best")
        margin = np.array([p.margin for p in branch.points])
        right.semilogy(radii, margin, ".-")
        folds = [p.r for p in branch.points if p.fold]
        for r in folds:
            right.axvline(r, color="C3", ls="--", lw=0.8)
        right.set_xlabel("r")
        right.set_ylabel("admissibility margin")
        kind = branch.termination.kind if branch.termination else "open"
        right.set_title(kind)
    return path


__all__ = ["STYLE", "plot_branch", "plot_loop", "plot_robin", "plot_spectrum", "plot_trajectory"]
