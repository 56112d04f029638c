"""Reproduction experiments: configured runs that emit CSV + manifest files.

Each run writes up to three artifacts into the output directory:

* ``<base>_traj.csv`` - trajectory table, header ``t,<component names...>``,
  floats in shortest round-trip form (optional, ``traj`` flag);
* ``<base>_summary.csv`` - per-experiment summary table;
* ``<base>_manifest.json`` - every spec field plus initial conditions,
  derived grid data and the library version.

Everything is deterministic: rerunning a spec byte-identically reproduces
its files.  ``run_all`` executes the full matrix behind the figures and the
jump-return table and writes one summary CSV per figure.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import __version__
from .analysis import (
    TrajectoryDivergedError,
    average_radius,
    count_spikes,
    jump_returns,
)
from .core import State
from .integrators import (
    DEFAULT_GUARD,
    METHOD_NAMES,
    Trajectory,
    integrate,
    make_method,
    reference_integrate,
    reference_step_size,
)
from .models import (
    REDUCED_VARIANTS,
    CurrentProtocol,
    HHParams,
    VdpParams,
    hh_rest_state,
    hh_system,
    integrate_reduced,
    reduced_rest_state,
    vdp_initial_state,
    vdp_system,
)

__all__ = ["ExperimentSpec", "SpecError", "EXPERIMENTS", "run", "run_all",
           "load_manifest", "stiff_jump_stats"]

EXPERIMENTS = ("vdp-nonstiff", "vdp-stiff", "vdp-convergence", "vdp-jumps",
               "hh", "hh-reduced", "integrate")

# Divergence bound for the neuron experiments.  Physical voltages are pinned
# between the reversal potentials (-77 .. +55 mV) and gates live in [0, 1];
# any component beyond 200 is unambiguous numerical breakdown, long before
# the generic 1e6 guard would notice bounded garbage oscillations.
HH_GUARD = 200.0

# Spike detection for the neuron experiments.  Strongly damped but clearly
# visible action potentials (e.g. exponential Euler at h = 0.8) peak within
# a few mV of 0, so the counting threshold sits below that but far above
# both the resting band (~ -65 mV) and subthreshold wobble.
HH_SPIKE_THRESHOLD = -10.0
HH_SPIKE_SEPARATION = 2.0

_TRAJ_TARGET_ROWS = 50_000


class SpecError(ValueError):
    """An invalid or inconsistent experiment specification."""


@dataclass(frozen=True)
class ExperimentSpec:
    """One reproduction run: model + method + step size + protocol."""

    experiment: str
    method: str | None = None
    h: float | None = None
    epsilon: float = 0.05
    i_on: float = 10.0
    t_on: float = 50.0
    t_off: float = 150.0
    t_end: float | None = None
    model: str = "vdp"
    out: str = "."
    traj: bool = True
    stride: int = 0  # 0 = choose automatically from the grid length

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise SpecError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.experiment == "hh-reduced":
            if self.method not in REDUCED_VARIANTS:
                raise SpecError(
                    f"method {self.method!r} is incompatible with hh-reduced: the reduced "
                    f"model is not conditionally linear, so splitting/composition methods "
                    f"do not apply; choose from {REDUCED_VARIANTS}")
        elif self.method is not None and self.method not in METHOD_NAMES:
            raise SpecError(f"unknown method {self.method!r}; choose from {METHOD_NAMES}")
        if self.method is None:
            raise SpecError(f"experiment {self.experiment!r} needs --method")
        if self.h is None or not self.h > 0:
            raise SpecError(f"invalid step size h={self.h}; need h > 0")
        if self.experiment == "integrate" and self.model not in ("vdp", "hh"):
            raise SpecError(f"unknown model {self.model!r}; choose vdp or hh")

    def resolved_t_end(self) -> float:
        if self.t_end is not None:
            return self.t_end
        if self.experiment in ("hh", "hh-reduced"):
            return 200.0
        if self.experiment in ("vdp-stiff", "vdp-jumps"):
            return 40.0
        if self.experiment == "integrate":
            return 200.0 if self.model == "hh" else 400.0
        return 400.0


def _fmt(x: float) -> str:
    return repr(float(x))


def _slug(spec: ExperimentSpec) -> str:
    parts = [spec.experiment]
    if spec.experiment == "integrate":
        parts.append(spec.model)
    parts.append(spec.method)
    parts.append("h" + _fmt(spec.h))
    return "__".join(parts)


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def write_trajectory_csv(path: str, traj: Trajectory, labels) -> None:
    t = traj.times()
    with open(path, "w", newline="") as f:
        f.write("t," + ",".join(labels) + "\n")
        for k in range(len(traj.states)):
            f.write(_fmt(t[k]) + "," + ",".join(_fmt(v) for v in traj.states[k]) + "\n")


def _auto_stride(n_steps: int, requested: int, target: int = _TRAJ_TARGET_ROWS) -> int:
    if requested > 0:
        return requested
    return max(1, -(-n_steps // target))


def _thin(traj: Trajectory, target: int = _TRAJ_TARGET_ROWS) -> Trajectory:
    """Subsample recorded states so CSV output stays a sane size."""
    k = max(1, -(-len(traj.states) // target))
    if k == 1:
        return traj
    return Trajectory(traj.t0, traj.h, traj.states[::k].copy(), traj.stride * k,
                      traj.diverged_at, traj.method_id, traj.model_id, traj.x_end)


def _manifest(spec: ExperimentSpec, extra: dict) -> dict:
    doc = {"spec": dataclasses.asdict(spec), "version": __version__}
    doc.update(extra)
    return doc


def _write_manifest(path: str, doc: dict) -> None:
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def load_manifest(path: str) -> ExperimentSpec:
    """Reconstruct the spec a manifest was written from."""
    with open(path) as f:
        doc = json.load(f)
    return ExperimentSpec(**doc["spec"])


def _vdp_setup(spec: ExperimentSpec):
    sys = vdp_system(VdpParams(spec.epsilon))
    return sys, vdp_initial_state()


def _hh_setup(spec: ExperimentSpec):
    params = HHParams()
    proto = CurrentProtocol(spec.i_on, spec.t_on, spec.t_off)
    return params, proto, hh_system(params, proto), hh_rest_state(params)


def stiff_jump_stats(sys, method, h: float, epsilon: float, t_end: float,
                     stride: int = 0, max_t_end: float = 6000.0):
    """Jump-return statistics with automatic horizon extension.

    If the requested horizon captures fewer than 4 post-transient events,
    the horizon doubles until at least 6 are captured (the landing-point
    statistics need a few cycles to be meaningful).  Returns
    (JumpReturns | None, trajectory, t_end_used); None marks divergence.
    """
    t = t_end
    needed = 4  # enough at the requested horizon; extensions aim for 6
    while True:
        n = int(round(t / h))
        traj = integrate(sys, method, vdp_initial_state(), t, h,
                         stride=_auto_stride(n, stride, 400_000))
        if traj.diverged:
            return None, traj, t
        try:
            jr = jump_returns(traj, epsilon)
            n_events = jr.n_events
        except ValueError:
            jr, n_events = None, 0
        if n_events >= needed:
            return jr, traj, t
        if 2 * t > max_t_end:
            if jr is not None:
                return jr, traj, t
            raise RuntimeError(
                f"no jump events within t_end={t} (method={method.name}, h={h})")
        t = 2 * t
        needed = 6


def run(spec: ExperimentSpec) -> dict:
    """Execute one experiment; returns the manifest document (also on disk)."""
    spec.validate()
    os.makedirs(spec.out, exist_ok=True)
    base = os.path.join(spec.out, _slug(spec))
    t_end = spec.resolved_t_end()

    if spec.experiment in ("vdp-nonstiff", "vdp-stiff", "vdp-convergence", "vdp-jumps"):
        doc = _run_vdp(spec, base, t_end)
    elif spec.experiment in ("hh", "hh-reduced"):
        doc = _run_hh(spec, base, t_end)
    else:
        doc = _run_integrate(spec, base, t_end)
    _write_manifest(base + "_manifest.json", doc)
    return doc


def _record_traj(spec, base, traj, labels, doc):
    written = _thin(traj)
    if spec.traj:
        path = base + "_traj.csv"
        write_trajectory_csv(path, written, labels)
        doc["files"]["trajectory"] = os.path.basename(path)
    doc["grid"] = {
        "t0": written.t0,
        "h": written.h,
        "stride": written.stride,
        "rows": int(len(written.states)),
        "diverged_at": written.diverged_at,
    }


def _run_vdp(spec: ExperimentSpec, base: str, t_end: float) -> dict:
    sys, s0 = _vdp_setup(spec)
    m = make_method(spec.method, sys)
    doc = _manifest(spec, {"model": "vdp", "initial_state": list(s0.x),
                           "t_end": t_end, "guard": DEFAULT_GUARD, "files": {}})

    if spec.experiment == "vdp-jumps" or spec.experiment == "vdp-stiff":
        jr, traj, t_used = stiff_jump_stats(sys, m, spec.h, spec.epsilon, t_end,
                                            stride=spec.stride)
        doc["t_end"] = t_used
        _record_traj(spec, base, traj, sys.labels, doc)
        row = [spec.method, float(spec.h)]
        if jr is None:
            row += [math.nan, math.nan, 0]
        else:
            row += [jr.mean_abs_y1, jr.mean_abs_y2, jr.n_events]
        path = base + "_summary.csv"
        _write_csv(path, ["method", "h", "mean_abs_y1", "mean_abs_y2", "n_events"], [row])
        doc["files"]["summary"] = os.path.basename(path)
        return doc

    n = int(round(t_end / spec.h))
    traj = integrate(sys, m, s0, t_end, spec.h, stride=_auto_stride(n, spec.stride))
    _record_traj(spec, base, traj, sys.labels, doc)
    if traj.diverged:
        rows = [[spec.method, float(spec.h), math.nan, math.nan]]
    else:
        stats = average_radius(traj)
        rows = [[spec.method, float(spec.h), stats.mean_radius,
                 abs(stats.mean_radius - 2.0)]]
    path = base + "_summary.csv"
    _write_csv(path, ["method", "h", "mean_radius", "radius_error"], rows)
    doc["files"]["summary"] = os.path.basename(path)
    return doc


def _run_hh(spec: ExperimentSpec, base: str, t_end: float) -> dict:
    params, proto, sys, s0 = _hh_setup(spec)
    doc = _manifest(spec, {"model": spec.experiment, "initial_state": list(s0.x),
                           "t_end": t_end, "guard": HH_GUARD,
                           "spike_threshold": HH_SPIKE_THRESHOLD,
                           "spike_min_separation": HH_SPIKE_SEPARATION,
                           "files": {}})
    n = int(round(t_end / spec.h))
    stride = _auto_stride(n, spec.stride)
    if spec.experiment == "hh-reduced":
        s0 = reduced_rest_state(params)
        doc["initial_state"] = list(s0.x)
        traj = integrate_reduced(params, proto, s0, t_end, spec.h, spec.method,
                                 guard=HH_GUARD, stride=stride)
        labels = ("V", "n", "h")
    else:
        m = make_method(spec.method, sys)
        traj = integrate(sys, m, s0, t_end, spec.h, guard=HH_GUARD, stride=stride)
        labels = sys.labels
    _record_traj(spec, base, traj, labels, doc)

    if traj.diverged:
        row = [spec.method, float(spec.h), 0, math.nan, "false"]
    else:
        spikes = count_spikes(traj, threshold=HH_SPIKE_THRESHOLD,
                              min_separation=HH_SPIKE_SEPARATION)
        amp = float(np.mean(spikes.amplitudes)) if spikes.count else math.nan
        row = [spec.method, float(spec.h), spikes.count, amp, "true"]
    path = base + "_summary.csv"
    _write_csv(path, ["method", "h", "spike_count", "mean_amplitude", "stable"], [row])
    doc["files"]["summary"] = os.path.basename(path)
    return doc


def _run_integrate(spec: ExperimentSpec, base: str, t_end: float) -> dict:
    if spec.model == "hh":
        params, proto, sys, s0 = _hh_setup(spec)
        guard = HH_GUARD
    else:
        sys, s0 = _vdp_setup(spec)
        guard = DEFAULT_GUARD
    m = make_method(spec.method, sys)
    n = int(round(t_end / spec.h))
    traj = integrate(sys, m, s0, t_end, spec.h, guard=guard,
                     stride=_auto_stride(n, spec.stride))
    doc = _manifest(spec, {"model": spec.model, "initial_state": list(s0.x),
                           "t_end": t_end, "guard": guard, "files": {}})
    spec = dataclasses.replace(spec, traj=True)  # the trajectory is the artifact
    _record_traj(spec, base, traj, sys.labels, doc)
    return doc


# ---------------------------------------------------------------------------
# Full reproduction matrix

FIG2_H = (0.1, 0.3, 0.5)
FIG3_GRIDS = {
    "euler": (0.005, 0.01, 0.02, 0.04),
    "exp-euler": (0.005, 0.01, 0.02, 0.04),
    "si-euler": (0.005, 0.01, 0.02, 0.04),
    "exp-midpoint": (0.2, 0.3, 0.4, 0.5),
    "lie-trotter": (0.05, 0.1, 0.2, 0.4),
    "symplectic-euler": (0.05, 0.1, 0.2, 0.4),
    "strang": (0.05, 0.1, 0.2, 0.4),
    "stormer-verlet": (0.05, 0.1, 0.2, 0.4),
}
TABLE1_H = (1e-4, 1e-3, 1e-2)
HH_H = (0.1, 0.4, 0.8)
HH_METHODS = ("euler", "exp-euler", "si-euler", "exp-midpoint",
              "lie-trotter", "symplectic-euler", "strang", "stormer-verlet")
FIG8_I_ON = (10.0, 6.0, 5.0)
NONSTIFF_EPS = 0.05
STIFF_EPS = 50.0


def _ref_runs(out: str) -> list[dict]:
    entries = []
    sysn = vdp_system(VdpParams(NONSTIFF_EPS))
    ref = reference_integrate(sysn, vdp_initial_state(), 400.0)
    path = os.path.join(out, "ref_vdp_nonstiff_traj.csv")
    write_trajectory_csv(path, _thin(ref), sysn.labels)
    _write_manifest(os.path.join(out, "ref_vdp_nonstiff_manifest.json"),
                    {"model": "vdp", "epsilon": NONSTIFF_EPS, "t_end": 400.0,
                     "h": ref.h, "version": __version__})
    entries.append({"panel": "vdp-nonstiff-reference", "file": os.path.basename(path),
                    "h": ref.h, "stat": average_radius(ref).mean_radius})

    syss = vdp_system(VdpParams(STIFF_EPS))
    refs = reference_integrate(syss, vdp_initial_state(), 400.0)
    path = os.path.join(out, "ref_vdp_stiff_traj.csv")
    write_trajectory_csv(path, _thin(refs), syss.labels)
    _write_manifest(os.path.join(out, "ref_vdp_stiff_manifest.json"),
                    {"model": "vdp", "epsilon": STIFF_EPS, "t_end": 400.0,
                     "h": refs.h, "version": __version__})
    jr = jump_returns(refs, STIFF_EPS)
    entries.append({"panel": "vdp-stiff-reference", "file": os.path.basename(path),
                    "h": refs.h, "stat": jr.mean_abs_y1})

    params, proto = HHParams(), CurrentProtocol(10.0)
    sysh = hh_system(params, proto)
    refh = reference_integrate(sysh, hh_rest_state(params), 200.0)
    path = os.path.join(out, "ref_hh_traj.csv")
    write_trajectory_csv(path, _thin(refh), sysh.labels)
    _write_manifest(os.path.join(out, "ref_hh_manifest.json"),
                    {"model": "hh", "i_on": 10.0, "t_on": 50.0, "t_off": 150.0,
                     "t_end": 200.0, "h": refh.h, "version": __version__})
    spikes = count_spikes(refh, threshold=HH_SPIKE_THRESHOLD)
    entries.append({"panel": "hh-reference", "file": os.path.basename(path),
                    "h": refh.h, "stat": float(spikes.count)})
    return entries


def run_all(out: str) -> list[str]:
    """Execute the full reproduction matrix into ``out``.

    Returns a list of failure descriptions (empty when everything ran);
    individual failures do not stop the rest of the matrix.
    """
    os.makedirs(out, exist_ok=True)
    failures: list[str] = []

    def attempt(label, fn):
        try:
            return fn()
        except Exception as exc:  # keep going; report at the end
            failures.append(f"{label}: {exc!r}")
            return None

    # references (figs 1 and 4)
    refs = attempt("references", lambda: _ref_runs(out))
    if refs is not None:
        _write_csv(os.path.join(out, "fig1_summary.csv"),
                   ["panel", "file", "h", "stat"],
                   [[r["panel"], r["file"], float(r["h"]), float(r["stat"])] for r in refs
                    if r["panel"].startswith("vdp")])
        _write_csv(os.path.join(out, "fig4_summary.csv"),
                   ["panel", "file", "h", "stat"],
                   [[r["panel"], r["file"], float(r["h"]), float(r["stat"])] for r in refs
                    if r["panel"] == "hh-reference"])

    # fig 2: non-stiff phase portraits
    fig2_rows = []
    for name in HH_METHODS:
        for h in FIG2_H:
            spec = ExperimentSpec("vdp-nonstiff", method=name, h=h,
                                  epsilon=NONSTIFF_EPS, out=out)
            doc = attempt(f"vdp-nonstiff {name} h={h}", lambda s=spec: run(s))
            if doc:
                fig2_rows.append([name, float(h),
                                  doc["files"].get("trajectory", ""),
                                  doc["grid"]["diverged_at"] is None])
    _write_csv(os.path.join(out, "fig2_summary.csv"),
               ["method", "h", "file", "stable"], fig2_rows)

    # fig 3: radius-error convergence table
    fig3_rows = []
    for name, grid in FIG3_GRIDS.items():
        sys = vdp_system(VdpParams(NONSTIFF_EPS))
        m = make_method(name, sys)
        for h in grid:
            def one(name=name, m=m, sys=sys, h=h):
                traj = integrate(sys, m, vdp_initial_state(), 400.0, h)
                if traj.diverged:
                    return [name, float(h), math.nan, math.nan]
                stats = average_radius(traj)
                return [name, float(h), stats.mean_radius, abs(stats.mean_radius - 2.0)]
            row = attempt(f"vdp-convergence {name} h={h}", one)
            if row:
                fig3_rows.append(row)
    _write_csv(os.path.join(out, "fig3_convergence.csv"),
               ["method", "h", "mean_radius", "radius_error"], fig3_rows)

    # table 1 + stiff phase portraits (fig 5)
    t1_rows, fig5_rows = [], []
    for name in HH_METHODS:
        for h in TABLE1_H:
            spec = ExperimentSpec("vdp-jumps", method=name, h=h,
                                  epsilon=STIFF_EPS, out=out)
            doc = attempt(f"vdp-jumps {name} h={h}", lambda s=spec: run(s))
            if not doc:
                continue
            summary = os.path.join(out, doc["files"]["summary"])
            with open(summary) as f:
                row = f.readlines()[1].strip().split(",")
            t1_rows.append(row)
            fig5_rows.append([name, float(h), doc["files"].get("trajectory", ""),
                              doc["grid"]["diverged_at"] is None])
    _write_csv(os.path.join(out, "table1_jumps.csv"),
               ["method", "h", "mean_abs_y1", "mean_abs_y2", "n_events"],
               t1_rows)
    _write_csv(os.path.join(out, "fig5_summary.csv"),
               ["method", "h", "file", "stable"], fig5_rows)

    # figs 6/7: HH spiking matrix
    hh_rows = []
    for name in HH_METHODS:
        for h in HH_H:
            spec = ExperimentSpec("hh", method=name, h=h, out=out)
            doc = attempt(f"hh {name} h={h}", lambda s=spec: run(s))
            if not doc:
                continue
            summary = os.path.join(out, doc["files"]["summary"])
            with open(summary) as f:
                hh_rows.append(f.readlines()[1].strip().split(","))
    _write_csv(os.path.join(out, "fig6_spikes.csv"),
               ["method", "h", "spike_count", "mean_amplitude", "stable"], hh_rows)
    _write_csv(os.path.join(out, "fig7_summary.csv"),
               ["method", "h", "spike_count", "mean_amplitude", "stable"], hh_rows)

    # fig 8: reduced vs full model across input currents
    fig8_rows = []
    params = HHParams()
    for i_on in FIG8_I_ON:
        proto = CurrentProtocol(i_on)

        def full(i_on=i_on, proto=proto):
            sysh = hh_system(params, proto)
            traj = reference_integrate(sysh, hh_rest_state(params), 200.0)
            path = os.path.join(out, f"fig8_full_I{_fmt(i_on)}_traj.csv")
            write_trajectory_csv(path, _thin(traj), sysh.labels)
            spikes = count_spikes(traj, threshold=HH_SPIKE_THRESHOLD)
            return ["full", float(i_on), "reference", float(traj.h),
                    spikes.count, os.path.basename(path)]

        row = attempt(f"fig8 full I={i_on}", full)
        if row:
            fig8_rows.append(row)

        h_ref = reference_step_size(hh_system(params, proto))

        def reduced(i_on=i_on, proto=proto, h=h_ref):
            n = int(round(200.0 / h))
            traj = integrate_reduced(params, proto, reduced_rest_state(params),
                                     200.0, h, "exp-euler", guard=HH_GUARD,
                                     stride=_auto_stride(n, 0, 400_000))
            path = os.path.join(out, f"fig8_reduced_I{_fmt(i_on)}_traj.csv")
            write_trajectory_csv(path, _thin(traj), ("V", "n", "h"))
            spikes = count_spikes(traj, threshold=HH_SPIKE_THRESHOLD)
            return ["reduced", float(i_on), "exp-euler", float(h),
                    spikes.count, os.path.basename(path)]

        row = attempt(f"fig8 reduced I={i_on}", reduced)
        if row:
            fig8_rows.append(row)

        for variant in REDUCED_VARIANTS:
            spec = ExperimentSpec("hh-reduced", method=variant, h=0.8,
                                  i_on=i_on, out=out)
            doc = attempt(f"hh-reduced {variant} I={i_on}", lambda s=spec: run(s))
            if doc:
                summary = os.path.join(out, doc["files"]["summary"])
                with open(summary) as f:
                    r = f.readlines()[1].strip().split(",")
                fig8_rows.append(["reduced", float(i_on), variant, float(r[1]),
                                  int(r[2]), doc["files"].get("trajectory", "")])
    _write_csv(os.path.join(out, "fig8_summary.csv"),
               ["model", "i_on", "method", "h", "spike_count", "file"], fig8_rows)

    _write_manifest(os.path.join(out, "run_all_manifest.json"),
                    {"version": __version__, "failures": failures})
    return failures
