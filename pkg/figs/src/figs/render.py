"""Rendering of figure recipes to PNG files.

All inputs are loaded and validated before any output file is created, so a
bad CSV can never leave a partial image behind.  Styles are fixed and no
timestamps are embedded: rendering the same inputs twice produces identical
bytes.
"""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dataio import RenderInputError, load_table, load_trajectory
from .recipes import FigureRecipe, Panel

__all__ = ["build_figure", "render"]

DPI = 110

_METHOD_ORDER = ("euler", "exp-euler", "si-euler", "exp-midpoint",
                 "lie-trotter", "symplectic-euler", "strang", "stormer-verlet")


def _lienard(x1, x2, eps):
    return x1, x1 - x1 ** 3 / 3.0 - x2 / eps


def _nullcline_overlay(ax, y1_range=(-2.6, 2.6)):
    y1 = np.linspace(*y1_range, 400)
    ax.plot(y1, y1 - y1 ** 3 / 3.0, "k--", lw=0.8, zorder=0)


def _circle_overlay(ax, radius):
    th = np.linspace(0, 2 * math.pi, 256)
    ax.plot(radius * np.cos(th), radius * np.sin(th), "k--", lw=0.8, zorder=0)


def _unstable(ax, title):
    ax.text(0.5, 0.5, "unstable", ha="center", va="center",
            transform=ax.transAxes, color="crimson")
    ax.set_xticks([]), ax.set_yticks([])
    ax.set_title(title, fontsize=8)


def _load_panels(recipe: FigureRecipe, data_dir: str):
    loaded = {}
    for p in recipe.panels:
        if p.file:
            loaded[p.file] = load_trajectory(os.path.join(data_dir, p.file))
    return loaded


def _grid(recipe, figsize):
    rows, cols = recipe.layout
    fig, axes = plt.subplots(rows, cols, figsize=figsize, squeeze=False)
    return fig, axes.ravel()


def _phase_grid(recipe, data_dir):
    data = _load_panels(recipe, data_dir)
    fig, axes = _grid(recipe, (2.4 * recipe.layout[1], 2.2 * recipe.layout[0]))
    for ax, p in zip(axes, recipe.panels):
        if not p.file:
            _unstable(ax, p.title)
            continue
        _, arr = data[p.file]
        half = len(arr) // 2
        ax.plot(arr[half:, 1], arr[half:, 2], lw=0.6)
        if recipe.circle:
            _circle_overlay(ax, recipe.circle)
        ax.set_title(p.title, fontsize=8)
        ax.set_aspect("equal", adjustable="datalim")
    _label_edges(axes, recipe)
    return fig


def _lienard_grid(recipe, data_dir):
    data = _load_panels(recipe, data_dir)
    fig, axes = _grid(recipe, (2.4 * recipe.layout[1], 2.2 * recipe.layout[0]))
    for ax, p in zip(axes, recipe.panels):
        if not p.file:
            _unstable(ax, p.title)
            continue
        _, arr = data[p.file]
        eps = p.epsilon
        if eps is None:
            raise RenderInputError(f"panel {p.title!r} lacks epsilon for the "
                                   f"Lienard transform")
        skip = len(arr) // 5
        y1, y2 = _lienard(arr[skip:, 1], arr[skip:, 2], eps)
        ax.plot(y1, y2, lw=0.5)
        if recipe.nullcline:
            _nullcline_overlay(ax)
        ax.set_title(p.title, fontsize=8)
        ax.set_xlim(-3.1, 3.1)
        ax.set_ylim(-1.6, 1.6)
    _label_edges(axes, recipe)
    return fig


def _trace_grid(recipe, data_dir):
    data = _load_panels(recipe, data_dir)
    fig, axes = _grid(recipe, (3.0 * recipe.layout[1], 1.7 * recipe.layout[0]))
    for ax, p in zip(axes, recipe.panels):
        if not p.file:
            _unstable(ax, p.title)
            continue
        _, arr = data[p.file]
        t, v = arr[:, 0], arr[:, 1]
        if recipe.tspan:
            sel = (t >= recipe.tspan[0]) & (t <= recipe.tspan[1])
            t, v = t[sel], v[sel]
        ax.plot(t, v, lw=0.6)
        ax.set_title(p.title, fontsize=8)
    _label_edges(axes, recipe)
    return fig


def _label_edges(axes, recipe):
    rows, cols = recipe.layout
    for k, ax in enumerate(axes):
        if k % cols == 0:
            ax.set_ylabel(recipe.ylabel, fontsize=8)
        if k // cols == rows - 1:
            ax.set_xlabel(recipe.xlabel, fontsize=8)


def _vdp_reference(recipe, data_dir):
    data = _load_panels(recipe, data_dir)
    fig, axes = _grid(recipe, (7.0, 3.2))
    # left: non-stiff phase plane with the radius-2 circle
    _, arr = data[recipe.panels[0].file]
    axes[0].plot(arr[:, 1], arr[:, 2], lw=0.5)
    _circle_overlay(axes[0], recipe.circle or 2.0)
    axes[0].set_xlabel("x1"), axes[0].set_ylabel("x2")
    axes[0].set_title(recipe.panels[0].title, fontsize=9)
    axes[0].set_aspect("equal", adjustable="datalim")
    # right: stiff Lienard plane with the cubic nullcline
    p = recipe.panels[1]
    _, arr = data[p.file]
    skip = len(arr) // 5
    y1, y2 = _lienard(arr[skip:, 1], arr[skip:, 2], p.epsilon)
    axes[1].plot(y1, y2, lw=0.6)
    _nullcline_overlay(axes[1])
    axes[1].set_xlabel("y1"), axes[1].set_ylabel("y2")
    axes[1].set_title(p.title, fontsize=9)
    return fig


def _hh_reference(recipe, data_dir):
    data = _load_panels(recipe, data_dir)
    header, arr = data[recipe.panels[0].file]
    fig, axes = _grid(recipe, (9.5, 2.8))
    t, v, n = arr[:, 0], arr[:, 1], arr[:, 2]
    axes[0].plot(t, v, lw=0.6)
    axes[0].set_xlabel("t (ms)"), axes[0].set_ylabel("V (mV)")
    axes[0].set_title(recipe.panels[0].title, fontsize=9)
    zoom = (t >= 50.0) & (t <= 80.0)
    axes[1].plot(t[zoom], v[zoom], lw=0.8)
    axes[1].set_xlabel("t (ms)")
    axes[1].set_title(recipe.panels[1].title, fontsize=9)
    axes[2].plot(v, n, lw=0.5)
    axes[2].set_xlabel("V (mV)"), axes[2].set_ylabel("n")
    axes[2].set_title(recipe.panels[2].title, fontsize=9)
    return fig


def _loglog(recipe, data_dir):
    rows = load_table(os.path.join(data_dir, recipe.table),
                      ("method", "h", "radius_error"))
    series: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        err = float(r["radius_error"])
        if math.isfinite(err) and err > 0:
            series.setdefault(r["method"], []).append((float(r["h"]), err))
    if not series:
        raise RenderInputError(f"{recipe.table}: no positive error values")
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    for name in _METHOD_ORDER:
        if name in series:
            pts = sorted(series[name])
            ax.loglog([h for h, _ in pts], [e for _, e in pts],
                      marker="o", ms=3, lw=1.0, label=name)
    h0 = np.array([min(h for pts in series.values() for h, _ in pts),
                   max(h for pts in series.values() for h, _ in pts)])
    for p in recipe.guide_slopes:
        ax.loglog(h0, 0.5 * (h0 / h0[-1]) ** p, color="gray", lw=0.8, ls=":",
                  gid=f"slope-guide-{p}")
        ax.annotate(f"slope {p}", (h0[0], 0.5 * (h0[0] / h0[-1]) ** p),
                    fontsize=7, color="gray")
    ax.set_xlabel(recipe.xlabel)
    ax.set_ylabel(recipe.ylabel)
    ax.legend(fontsize=7)
    return fig


_RENDERERS = {
    "vdp-reference": _vdp_reference,
    "phase-grid": _phase_grid,
    "lienard-grid": _lienard_grid,
    "trace-grid": _trace_grid,
    "hh-reference": _hh_reference,
    "loglog": _loglog,
}


def build_figure(recipe: FigureRecipe, data_dir: str):
    """Load every input and build the matplotlib figure (no file output)."""
    try:
        renderer = _RENDERERS[recipe.kind]
    except KeyError:
        raise RenderInputError(f"no renderer for recipe kind {recipe.kind!r}")
    fig = renderer(recipe, data_dir)
    fig.suptitle(recipe.figure_id, fontsize=10)
    fig.tight_layout()
    return fig


def render(recipe: FigureRecipe, data_dir: str, out_dir: str) -> str:
    """Render a recipe to ``<out_dir>/<figure_id>.png`` and return the path."""
    fig = build_figure(recipe, data_dir)  # inputs fully validated first
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{recipe.figure_id}.png")
    try:
        fig.savefig(path, dpi=DPI, metadata={"Software": None})
    finally:
        plt.close(fig)
    return path
