"""Figure recipes: which CSVs feed each figure and how panels are arranged.

Figure ids mirror the study being reproduced:

* fig1 - Van der Pol reference solutions (non-stiff phase plane, stiff
  Lienard plane with the cubic nullcline)
* fig2 - non-stiff limit cycles per method and step size
* fig3 - log-log radius-error convergence with slope guides 1, 2, 3
* fig4 - Hodgkin-Huxley reference (voltage trace, spike zoom, (V, n) plane)
* fig5 - stiff limit cycles per method and step size (Lienard plane)
* fig6 - Hodgkin-Huxley voltage traces per method and step size
* fig7 - zoomed view of the first spikes of fig6
* fig8 - full vs reduced (m = m_inf) model across input currents
* vdp-stiff-time - stiff oscillation traces (x1 vs t)
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .dataio import RenderInputError, load_manifest, load_table

__all__ = ["Panel", "FigureRecipe", "FIGURE_IDS", "build_recipe"]


@dataclass(frozen=True)
class Panel:
    title: str
    file: str = ""  # trajectory CSV; empty for an annotation-only panel
    note: str = ""
    epsilon: float | None = None  # for the Lienard transform


@dataclass(frozen=True)
class FigureRecipe:
    figure_id: str
    kind: str
    inputs: tuple[str, ...]
    panels: tuple[Panel, ...]
    layout: tuple[int, int]
    xlabel: str = ""
    ylabel: str = ""
    nullcline: bool = False       # overlay the cubic y2 = y1 - y1^3/3
    circle: float | None = None   # overlay a reference circle of this radius
    tspan: tuple[float, float] | None = None
    guide_slopes: tuple[int, ...] = ()
    table: str = ""               # for table-driven plots (fig3)


FIGURE_IDS = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8",
              "vdp-stiff-time")

_HH_METHODS = ("exp-euler", "si-euler", "exp-midpoint",
               "lie-trotter", "strang", "stormer-verlet")


def _require(data_dir: str, names) -> tuple[str, ...]:
    paths = []
    for name in names:
        path = os.path.join(data_dir, name)
        if not os.path.isfile(path):
            raise RenderInputError(f"missing input file: {path}")
        paths.append(name)
    return tuple(paths)


def _grid_panels(data_dir: str, summary: str, epsilon_from_manifest: bool = False):
    rows = load_table(os.path.join(data_dir, summary),
                      ("method", "h", "file", "stable"))
    panels = []
    inputs = [summary]
    for r in rows:
        stable = r["stable"] in ("True", "true")
        eps = None
        if r["file"] and epsilon_from_manifest:
            manifest = r["file"].replace("_traj.csv", "_manifest.json")
            eps = load_manifest(os.path.join(data_dir, manifest))["spec"]["epsilon"]
            inputs.append(manifest)
        title = f"{r['method']}  h={float(r['h']):g}"
        if r["file"] and stable:
            panels.append(Panel(title, r["file"], epsilon=eps))
            inputs.append(r["file"])
        else:
            panels.append(Panel(title, "", note="unstable", epsilon=eps))
    n_h = len({r["h"] for r in rows})
    layout = (len(rows) // n_h, n_h)
    return panels, inputs, layout


def build_recipe(figure_id: str, data_dir: str) -> FigureRecipe:
    """Assemble and validate the recipe for one figure id."""
    if figure_id == "fig1":
        inputs = _require(data_dir, ("ref_vdp_nonstiff_traj.csv",
                                     "ref_vdp_stiff_traj.csv",
                                     "ref_vdp_stiff_manifest.json"))
        eps = load_manifest(os.path.join(data_dir, "ref_vdp_stiff_manifest.json"))["epsilon"]
        return FigureRecipe(
            figure_id, "vdp-reference", inputs,
            (Panel("non-stiff (eps = 0.05)", "ref_vdp_nonstiff_traj.csv"),
             Panel("stiff (eps = 50)", "ref_vdp_stiff_traj.csv", epsilon=eps)),
            layout=(1, 2), nullcline=True, circle=2.0)

    if figure_id == "fig2":
        panels, inputs, layout = _grid_panels(data_dir, "fig2_summary.csv")
        return FigureRecipe(figure_id, "phase-grid", _require(data_dir, inputs),
                            tuple(panels), layout, xlabel="x1", ylabel="x2",
                            circle=2.0)

    if figure_id == "fig3":
        inputs = _require(data_dir, ("fig3_convergence.csv",))
        return FigureRecipe(figure_id, "loglog", inputs, (), (1, 1),
                            xlabel="h", ylabel="error in average radius",
                            guide_slopes=(1, 2, 3), table="fig3_convergence.csv")

    if figure_id == "fig4":
        inputs = _require(data_dir, ("ref_hh_traj.csv",))
        return FigureRecipe(
            figure_id, "hh-reference", inputs,
            (Panel("voltage", "ref_hh_traj.csv"),
             Panel("first spikes", "ref_hh_traj.csv"),
             Panel("(V, n) plane", "ref_hh_traj.csv")),
            layout=(1, 3), xlabel="t (ms)", ylabel="V (mV)")

    if figure_id == "fig5":
        panels, inputs, layout = _grid_panels(data_dir, "fig5_summary.csv",
                                              epsilon_from_manifest=True)
        return FigureRecipe(figure_id, "lienard-grid", _require(data_dir, inputs),
                            tuple(panels), layout, xlabel="y1", ylabel="y2",
                            nullcline=True)

    if figure_id in ("fig6", "fig7"):
        rows = load_table(os.path.join(data_dir, "fig6_spikes.csv"),
                          ("method", "h", "spike_count", "stable"))
        panels, inputs = [], ["fig6_spikes.csv"]
        hs = sorted({float(r["h"]) for r in rows})
        for name in _HH_METHODS:
            for h in hs:
                row = next(r for r in rows
                           if r["method"] == name and float(r["h"]) == h)
                fname = f"hh__{name}__h{h!r}_traj.csv"
                if row["stable"] == "true":
                    panels.append(Panel(f"{name}  h={h:g}", fname))
                    inputs.append(fname)
                else:
                    panels.append(Panel(f"{name}  h={h:g}", "", note="unstable"))
        tspan = (45.0, 80.0) if figure_id == "fig7" else None
        return FigureRecipe(figure_id, "trace-grid", _require(data_dir, inputs),
                            tuple(panels), (len(_HH_METHODS), len(hs)),
                            xlabel="t (ms)", ylabel="V (mV)", tspan=tspan)

    if figure_id == "fig8":
        rows = load_table(os.path.join(data_dir, "fig8_summary.csv"),
                          ("model", "i_on", "method", "h", "spike_count", "file"))
        panels, inputs = [], ["fig8_summary.csv"]
        currents = sorted({float(r["i_on"]) for r in rows}, reverse=True)
        for model in ("full", "reduced"):
            for i_on in currents:
                row = next(r for r in rows
                           if r["model"] == model and float(r["i_on"]) == i_on
                           and r["method"] in ("reference", "exp-euler")
                           and float(r["h"]) < 0.01)
                panels.append(Panel(f"{model}  I={i_on:g}  ({row['spike_count']} spikes)",
                                    row["file"]))
                inputs.append(row["file"])
        return FigureRecipe(figure_id, "trace-grid", _require(data_dir, inputs),
                            tuple(panels), (2, len(currents)),
                            xlabel="t (ms)", ylabel="V (mV)")

    if figure_id == "vdp-stiff-time":
        panels, inputs, layout = _grid_panels(data_dir, "fig5_summary.csv")
        return FigureRecipe(figure_id, "trace-grid", _require(data_dir, inputs),
                            tuple(panels), layout, xlabel="t", ylabel="x1")

    raise RenderInputError(f"unknown figure id {figure_id!r}; choose from {FIGURE_IDS}")
