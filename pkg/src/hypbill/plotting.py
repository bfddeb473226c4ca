"""Figures for CLI reports, rendered off-screen."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .geometry import BilliardTable


def _figure(ncols: int = 1, size=(5.0, 4.0)):
    fig = Figure(figsize=(size[0] * ncols, size[1]))
    FigureCanvasAgg(fig)
    axes = [fig.add_subplot(1, ncols, i + 1) for i in range(ncols)]
    return fig, axes


def _save(fig: Figure, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # fixed metadata keeps the PNG bytes reproducible
    fig.savefig(path, dpi=110, metadata={"Software": None})
    return path


def draw_table(ax, table: BilliardTable) -> None:
    Lx, Ly = table.periods
    ax.set_xlim(0, Lx)
    ax.set_ylim(0, Ly)
    ax.set_aspect("equal")
    if not table.metric.is_flat:
        n = 120
        X, Y = np.meshgrid(np.arange(n) * (Lx / n), np.arange(n) * (Ly / n))
        K = table.metric.curvature_grid(n)
        lim = float(np.abs(K).max()) or 1.0
        ax.pcolormesh(X, Y, K, cmap="RdBu_r", vmin=-lim, vmax=lim, shading="auto", alpha=0.5)
    for wall in table.walls:
        pts = wall.samples(400)
        pts = np.vstack([pts, pts[:1]])
        for dx in (-Lx, 0.0, Lx):
            for dy in (-Ly, 0.0, Ly):
                ax.fill(pts[:, 0] + dx, pts[:, 1] + dy, color="0.75", ec="k", lw=0.8)


def plot_trajectory(path: Path, table: BilliardTable, samples: np.ndarray) -> Path:
    fig, (ax,) = _figure()
    draw_table(ax, table)
    if samples is not None and len(samples):
        xy = samples[:, 1:3]
        # break the polyline where it wraps around the torus
        jumps = np.any(np.abs(np.diff(xy, axis=0)) > 0.5 * np.array(table.periods), axis=1)
        start = 0
        for i in np.flatnonzero(jumps) + 1:
            ax.plot(xy[start:i, 0], xy[start:i, 1], lw=0.6, color="C0")
            start = i
        ax.plot(xy[start:, 0], xy[start:, 1], lw=0.6, color="C0")
        hits = samples[samples[:, 5] == 1]
        ax.plot(hits[:, 1], hits[:, 2], ".", ms=3, color="C3")
    ax.set_title(table.name)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    return _save(fig, path)


def plot_riccati(path: Path, rows) -> Path:
    arr = np.array([r[:2] for r in rows], dtype=float)
    flags = np.array([r[4:6] for r in rows], dtype=int)
    fig, (ax,) = _figure(size=(7.0, 3.5))
    u = arr[:, 1].copy()
    ax.plot(arr[:, 0], np.arcsinh(u), lw=0.8)
    for t in arr[flags[:, 0] == 1, 0]:
        ax.axvline(t, color="C3", lw=0.6, ls="--")
    for t in arr[flags[:, 1] == 1, 0]:
        ax.axvline(t, color="0.6", lw=0.4)
    ax.set_xlabel("t")
    ax.set_ylabel("asinh(u)")
    ax.set_title("Riccati solution (dashed: blow-ups, grey: collisions)")
    return _save(fig, path)


def plot_lyapunov(path: Path, exponents: np.ndarray, mean: float, stderr: float) -> Path:
    fig, (ax,) = _figure()
    if len(exponents):
        ax.hist(exponents, bins=min(30, max(5, len(exponents) // 3)), color="C0", alpha=0.8)
    ax.axvline(mean, color="C3")
    ax.set_xlabel("exponent estimate")
    ax.set_ylabel("trajectories")
    ax.set_title(f"mean {mean:.4g} +- {stderr:.2g}")
    return _save(fig, path)


def plot_certificate(path: Path, cert) -> Path:
    fig, (a1, a2) = _figure(ncols=2)
    gaps = np.concatenate([np.diff(s.times) for s in cert.sequences if len(s.times) > 1] + [np.zeros(0)])
    term = np.concatenate([np.asarray(s.terminal_u, float) for s in cert.sequences] + [np.zeros(0)])
    if len(gaps):
        a1.hist(gaps, bins=40, color="C0")
    a1.set_xlabel("t_k+1 - t_k")
    a1.set_title(f"verdict: {cert.verdict}")
    term = term[np.isfinite(term)]
    if len(term):
        a2.hist(term, bins=40, color="C2")
    if cert.constants is not None:
        a2.axvline(cert.constants.m, color="C3", lw=0.8)
    a2.set_xlabel("u(t_k+1 +) from u(t_k +) = 0")
    return _save(fig, path)


def plot_horizon(path: Path, report) -> Path:
    fig, (ax,) = _figure(size=(7.0, 3.5))
    ft = np.where(np.isfinite(report.free_times), report.free_times, report.t_cap)
    worst = ft.max(axis=0)
    ax.semilogy(np.degrees(report.angles), worst, lw=0.6)
    ax.axhline(report.t_cap, color="C3", lw=0.6, ls="--")
    ax.set_xlabel("direction (degrees)")
    ax.set_ylabel("max free time over origins")
    ax.set_title(f"{len(report.capped)} capped samples")
    return _save(fig, path)


def plot_directions(path: Path, field) -> Path:
    fig, (a1, a2) = _figure(ncols=2)
    k = np.arange(len(field.unstable_angle))
    a1.plot(k, np.degrees(field.unstable_angle), label="unstable")
    a1.plot(k, np.degrees(field.stable_angle), label="stable")
    a1.set_xlabel("mesh index")
    a1.set_ylabel("angle (degrees)")
    a1.legend()
    with np.errstate(divide="ignore"):
        a2.semilogy(k, np.maximum(field.unstable_diameter, 1e-17), label="unstable")
        a2.semilogy(k, np.maximum(field.stable_diameter, 1e-17), label="stable")
    a2.set_xlabel("mesh index")
    a2.set_ylabel("cone width (rad)")
    a2.legend()
    return _save(fig, path)
