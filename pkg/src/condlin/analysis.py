"""Trajectory post-processing: limit-cycle radii, jump returns, spikes.

These are the observables behind the quantitative claims about the methods:
the averaged limit-cycle radius and its convergence order for the non-stiff
Van der Pol oscillator, the nullcline return points that control spike
frequency for the stiff oscillator, and spike counts/amplitudes for the
Hodgkin-Huxley neuron.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .integrators import Trajectory, integrate, make_method
from .models import VdpParams, vdp_initial_state, vdp_system

__all__ = [
    "TrajectoryDivergedError",
    "RadiusStats",
    "SpikeTrain",
    "JumpReturns",
    "CycleProfile",
    "average_radius",
    "radius_error_curve",
    "cycle_profile",
    "cycle_shape_error",
    "jump_returns",
    "count_spikes",
    "fit_loglog_slope",
]


class TrajectoryDivergedError(RuntimeError):
    """Raised when an analysis needs a trajectory that did not diverge."""


@dataclass(frozen=True)
class RadiusStats:
    mean_radius: float
    window: tuple[float, float]
    n_samples: int


@dataclass(frozen=True)
class SpikeTrain:
    spike_times: tuple[float, ...]
    amplitudes: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.spike_times)


@dataclass(frozen=True)
class JumpReturns:
    """(|y1|, |y2|) at the points where jumps land back on the nullcline."""

    events: tuple[tuple[float, float], ...]
    mean_abs_y1: float
    mean_abs_y2: float

    @property
    def n_events(self) -> int:
        return len(self.events)


def _require_completed(traj: Trajectory) -> None:
    if traj.diverged:
        raise TrajectoryDivergedError(
            f"trajectory ({traj.model_id}/{traj.method_id}) diverged at step {traj.diverged_at}")


def average_radius(traj: Trajectory, discard_fraction: float = 0.5) -> RadiusStats:
    """Mean of sqrt(x1^2 + x2^2) after discarding the leading transient."""
    _require_completed(traj)
    if not 0.0 <= discard_fraction < 1.0:
        raise ValueError("discard_fraction must lie in [0, 1)")
    t = traj.times()
    start = int(discard_fraction * len(traj.states))
    window = traj.states[start:, :2]
    r = np.sqrt(window[:, 0] ** 2 + window[:, 1] ** 2)
    return RadiusStats(float(r.mean()), (float(t[start]), float(t[-1])), len(r))


def radius_error_curve(method_name: str, epsilon: float, h_list,
                       t_end: float = 400.0, discard_fraction: float = 0.5,
                       x0: tuple[float, float] = (1.0, 0.0)):
    """Per-h error of the average limit-cycle radius against the exact value 2.

    Returns a list of (h, error) pairs; a diverged run yields error = nan
    rather than aborting the sweep.
    """
    sys = vdp_system(VdpParams(epsilon))
    m = make_method(method_name, sys)
    out = []
    for h in h_list:
        traj = integrate(sys, m, vdp_initial_state(*x0), t_end, h)
        if traj.diverged:
            out.append((h, math.nan))
            continue
        stats = average_radius(traj, discard_fraction)
        out.append((h, abs(stats.mean_radius - 2.0)))
    return out


@dataclass(frozen=True)
class CycleProfile:
    """Attractor radius as a function of phase angle, r(theta).

    Built by binning the late part of a trajectory over theta.  Used to
    measure how far another method's limit cycle sits from the reference
    cycle at matched phase, which is sensitive to the skew deformation that
    cancels out of the plain mean radius.
    """

    theta: np.ndarray
    r: np.ndarray

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        return np.interp(theta, self.theta, self.r, period=2.0 * math.pi)


def cycle_profile(traj: Trajectory, discard_fraction: float = 0.5,
                  n_bins: int = 720) -> CycleProfile:
    """Phase-binned radius profile of the attractor reached by a trajectory."""
    _require_completed(traj)
    x = traj.states[int(discard_fraction * len(traj.states)):]
    theta = np.arctan2(x[:, 1], x[:, 0])
    r = np.sqrt(x[:, 0] ** 2 + x[:, 1] ** 2)
    edges = np.linspace(-math.pi, math.pi, n_bins + 1)
    idx = np.digitize(theta, edges) - 1
    sums = np.bincount(idx, weights=r, minlength=n_bins)
    counts = np.bincount(idx, minlength=n_bins)
    filled = counts > 0
    if not filled.any():
        raise ValueError("empty trajectory window")
    centers = 0.5 * (edges[:-1] + edges[1:])
    return CycleProfile(centers[filled], sums[filled] / counts[filled])


def cycle_shape_error(traj: Trajectory, reference: CycleProfile,
                      discard_fraction: float = 0.5) -> float:
    """Mean radius deviation from the reference cycle at matched phase angle.

    Averages |r(t) - r_ref(theta(t))| over the late trajectory.  Unlike the
    error of the mean radius, this does not cancel the O(h) skew of the
    non-symmetric composition methods, so it recovers their first-order
    limit-cycle error.
    """
    _require_completed(traj)
    x = traj.states[int(discard_fraction * len(traj.states)):]
    theta = np.arctan2(x[:, 1], x[:, 0])
    r = np.sqrt(x[:, 0] ** 2 + x[:, 1] ** 2)
    return float(np.abs(r - reference(theta)).mean())


def jump_returns(traj: Trajectory, epsilon: float,
                 discard_fraction: float = 0.2,
                 y1_floor: float = 1.0) -> JumpReturns:
    """Nullcline return points for a stiff Van der Pol trajectory.

    States are mapped to Lienard coordinates; each visit to a nullcline
    branch (a maximal run of samples with one sign of y1 and |y1| above
    ``y1_floor``) contributes the point where |y1| attains its maximum -
    the landing point of the fast jump.  The maximum must be a strict local
    maximum interior to the trajectory, which drops branch visits cut off
    by either end of the run.  The leading ``discard_fraction`` is skipped
    so the approach to the limit cycle is not counted.
    """
    _require_completed(traj)
    x = traj.states
    start = int(discard_fraction * len(x))
    y1 = x[start:, 0]
    y2 = y1 - y1 ** 3 / 3.0 - x[start:, 1] / epsilon
    a = np.abs(y1)

    big = a > y1_floor
    events = []
    i = 0
    n = len(a)
    while i < n:
        if not big[i]:
            i += 1
            continue
        j = i
        while j < n and big[j] and (y1[j] > 0) == (y1[i] > 0):
            j += 1
        seg = slice(i, j)
        k = i + int(np.argmax(a[seg]))
        if 0 < k < n - 1 and a[k] > a[k - 1] and a[k] > a[k + 1]:
            events.append((float(a[k]), float(abs(y2[k]))))
        i = j
    if not events:
        raise ValueError("no jump-return events found; horizon too short?")
    arr = np.asarray(events)
    return JumpReturns(tuple(map(tuple, events)),
                       float(arr[:, 0].mean()), float(arr[:, 1].mean()))


def count_spikes(traj: Trajectory, component: int = 0, threshold: float = 0.0,
                 min_separation: float = 2.0) -> SpikeTrain:
    """Threshold-crossing spike detection on one trajectory component.

    A spike is an upward crossing of ``threshold`` followed by a downward
    crossing; its amplitude is the maximum of the component in between and
    its time is the time of that maximum.  Peaks closer than
    ``min_separation`` to the previous accepted spike are ignored.
    Diverged trajectories have no meaningful count and raise
    :class:`TrajectoryDivergedError` instead.
    """
    _require_completed(traj)
    v = traj.states[:, component]
    t = traj.times()
    above = v > threshold
    times = []
    amps = []
    i = 1
    n = len(v)
    while i < n:
        if above[i] and not above[i - 1]:
            j = i
            while j < n and above[j]:
                j += 1
            if j == n:
                break  # trajectory ends above threshold: incomplete spike
            k = i + int(np.argmax(v[i:j]))
            if not times or t[k] - times[-1] >= min_separation:
                times.append(float(t[k]))
                amps.append(float(v[k]))
            i = j
        else:
            i += 1
    return SpikeTrain(tuple(times), tuple(amps))


def fit_loglog_slope(points) -> tuple[float, float]:
    """Least-squares line through (log h, log err); returns (slope, intercept)."""
    pts = [(h, e) for h, e in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points for a slope fit")
    h = np.array([p[0] for p in pts])
    e = np.array([p[1] for p in pts])
    if not np.all(np.isfinite(e)) or np.any(e <= 0):
        raise ValueError("all error values must be positive and finite")
    slope, intercept = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope), float(intercept)
