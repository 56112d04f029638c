"""Acceptance suite: every quantitative claim the package is built to meet.

Each test prints one PASS/FAIL line (run pytest with -s or check the captured
output).  The expensive shared trajectories are computed once per module.
"""

import math
import sys as _sys

import numpy as np
import pytest

from condlin.analysis import (
    average_radius,
    count_spikes,
    cycle_profile,
    cycle_shape_error,
    fit_loglog_slope,
)
from condlin.core import (
    BACKWARD_EULER,
    EXACT,
    FORWARD_EULER,
    CondLinSystem,
    State,
    adjoint,
    check_conditional_linearity,
    component_flow,
    stability,
)
from condlin.experiments import HH_GUARD, HH_SPIKE_THRESHOLD, stiff_jump_stats
from condlin.integrators import (
    euler_type,
    euler_type_step,
    integrate,
    make_method,
    nonsym_composition,
    nonsym_composition_step,
    reference_integrate,
    step,
)
from condlin.models import (
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

EPS = 0.05
ULP = np.finfo(float).eps


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# shared expensive runs

@pytest.fixture(scope="module")
def nonstiff_profile(vdp_nonstiff):
    ref = reference_integrate(vdp_nonstiff, vdp_initial_state(), 400.0)
    return cycle_profile(ref)


@pytest.fixture(scope="module")
def jump_stats(vdp_stiff):
    needed = [("lie-trotter", 1e-4), ("lie-trotter", 1e-3), ("lie-trotter", 1e-2),
              ("strang", 1e-4), ("strang", 1e-3), ("strang", 1e-2),
              ("euler", 1e-2), ("exp-euler", 1e-2), ("si-euler", 1e-2),
              ("stormer-verlet", 1e-2)]
    stats = {}
    for name, h in needed:
        m = make_method(name, vdp_stiff)
        jr, traj, _ = stiff_jump_stats(vdp_stiff, m, h, 50.0, 40.0)
        stats[(name, h)] = jr  # None marks divergence
    return stats


@pytest.fixture(scope="module")
def hh_counts(hh_default):
    s0 = hh_rest_state()
    counts = {}
    for name in ("euler", "exp-euler", "si-euler", "exp-midpoint",
                 "lie-trotter", "symplectic-euler", "strang", "stormer-verlet"):
        m = make_method(name, hh_default)
        for h in (0.1, 0.4, 0.8):
            traj = integrate(hh_default, m, s0, 200.0, h, guard=HH_GUARD)
            if traj.diverged:
                counts[(name, h)] = "unstable"
            else:
                counts[(name, h)] = count_spikes(
                    traj, threshold=HH_SPIKE_THRESHOLD).count
    return counts


@pytest.fixture(scope="module")
def reduced_contrast():
    p = HHParams()
    out = {}
    for i_on in (10.0, 6.0, 5.0):
        proto = CurrentProtocol(i_on)
        sysh = hh_system(p, proto)
        full = reference_integrate(sysh, hh_rest_state(p), 200.0)
        out[("full", i_on)] = count_spikes(full, threshold=HH_SPIKE_THRESHOLD).count
        n = int(round(200.0 / 1e-4))
        red = integrate_reduced(p, proto, reduced_rest_state(p), 200.0, 1e-4,
                                "exp-euler", stride=max(1, n // 400_000))
        out[("reduced", i_on)] = count_spikes(red, threshold=HH_SPIKE_THRESHOLD).count
    return out


# ---------------------------------------------------------------------------
# criteria

def test_euler_type_radius_law(vdp_nonstiff):
    """Euler-type methods settle on a limit cycle of radius 2 sqrt(1 + h/eps)."""
    worst = ("", 0.0)
    for name in ("euler", "exp-euler", "si-euler"):
        m = make_method(name, vdp_nonstiff)
        for h in (0.005, 0.01, 0.02, 0.04):
            traj = integrate(vdp_nonstiff, m, vdp_initial_state(), 400.0, h)
            r = average_radius(traj).mean_radius
            predicted = 2.0 * math.sqrt(1.0 + h / EPS)
            rel = abs(r - predicted) / predicted
            if rel > worst[1]:
                worst = (f"{name} h={h}", rel)
    _report("euler-type radius law 2*sqrt(1+h/eps)", worst[1] <= 0.05,
            f"worst rel dev {worst[1]:.2%} at {worst[0]}, tol 5%")


def test_exp_midpoint_radius_law(vdp_nonstiff):
    """Exponential midpoint radius follows 2 sqrt(1 + h^3/(4 eps))."""
    m = make_method("exp-midpoint", vdp_nonstiff)
    worst = ("", 0.0)
    for h in (0.2, 0.3, 0.4, 0.5):
        traj = integrate(vdp_nonstiff, m, vdp_initial_state(), 400.0, h)
        r = average_radius(traj).mean_radius
        predicted = 2.0 * math.sqrt(1.0 + h ** 3 / (4.0 * EPS))
        rel = abs(r - predicted) / predicted
        if rel > worst[1]:
            worst = (f"h={h}", rel)
    _report("exp-midpoint radius law 2*sqrt(1+h^3/(4 eps))", worst[1] <= 0.05,
            f"worst rel dev {worst[1]:.2%} at {worst[0]}, tol 5%; "
            f"predicted radius at h=0.5 is 2.55")


def test_splitting_order_slopes(vdp_nonstiff, nonstiff_profile):
    """Limit-cycle error orders: 1 for non-symmetric, 2 for symmetric methods."""
    slopes = {}
    for name in ("lie-trotter", "symplectic-euler", "strang", "stormer-verlet"):
        m = make_method(name, vdp_nonstiff)
        pts = []
        for h in (0.05, 0.1, 0.2, 0.4):
            traj = integrate(vdp_nonstiff, m, vdp_initial_state(), 400.0, h)
            pts.append((h, cycle_shape_error(traj, nonstiff_profile)))
        slopes[name], _ = fit_loglog_slope(pts)
    ok = (abs(slopes["lie-trotter"] - 1) <= 0.25
          and abs(slopes["symplectic-euler"] - 1) <= 0.25
          and abs(slopes["strang"] - 2) <= 0.3
          and abs(slopes["stormer-verlet"] - 2) <= 0.3)
    detail = ", ".join(f"{k}={v:.2f}" for k, v in slopes.items())
    _report("splitting-order slopes (1,1,2,2)", ok, detail)


def test_table1_jump_returns(jump_stats):
    """Landing points (|y1|, |y2|) on the stiff nullcline per method and h."""
    checks = []

    for name in ("lie-trotter", "strang"):
        for h in (1e-4, 1e-3, 1e-2):
            jr = jump_stats[(name, h)]
            ok = (jr is not None and abs(jr.mean_abs_y1 - 2.00) <= 0.03
                  and abs(jr.mean_abs_y2 - 0.68) <= 0.03)
            got = "diverged" if jr is None else f"({jr.mean_abs_y1:.3f},{jr.mean_abs_y2:.3f})"
            checks.append((f"{name}@{h:g}={got}", ok))

    checks.append(("euler@0.01 unstable", jump_stats[("euler", 1e-2)] is None))

    for name, target, tol_rel in (("exp-euler", (3.18, 7.52), 0.15),
                                  ("si-euler", (4.34, 22.82), 0.15)):
        jr = jump_stats[(name, 1e-2)]
        ok = (jr is not None
              and abs(jr.mean_abs_y1 - target[0]) <= tol_rel * target[0]
              and abs(jr.mean_abs_y2 - target[1]) <= tol_rel * target[1])
        got = "diverged" if jr is None else f"({jr.mean_abs_y1:.2f},{jr.mean_abs_y2:.2f})"
        checks.append((f"{name}@0.01={got} vs {target}", ok))

    jr = jump_stats[("stormer-verlet", 1e-2)]
    ok = (jr is not None and abs(jr.mean_abs_y1 - 1.97) <= 0.1
          and abs(jr.mean_abs_y2 - 0.57) <= 0.1)
    got = "diverged" if jr is None else f"({jr.mean_abs_y1:.2f},{jr.mean_abs_y2:.2f})"
    checks.append((f"stormer-verlet@0.01={got} vs (1.97,0.57)", ok))

    bad = [c for c, ok in checks if not ok]
    _report("stiff jump-return table", not bad,
            "all rows match" if not bad else "; ".join(bad))


def test_hh_spike_counts(hh_counts, hh_ref_traj):
    """Spike counts across methods and step sizes, including instabilities."""
    failures = []

    def expect(name, h, want):
        got = hh_counts[(name, h)]
        if want == "unstable":
            ok = got == "unstable"
        elif isinstance(want, tuple):  # (op, value)
            ok = got != "unstable" and got <= want[1]
        else:
            ok = got == want
        if not ok:
            failures.append(f"{name}@{h}: got {got}, want {want}")

    ref_count = count_spikes(hh_ref_traj, threshold=HH_SPIKE_THRESHOLD).count
    if ref_count != 7:
        failures.append(f"reference: got {ref_count}, want 7")

    for h, want in zip((0.1, 0.4, 0.8), (7, 6, 5)):
        expect("exp-euler", h, want)
    expect("si-euler", 0.1, 6)
    expect("si-euler", 0.4, 5)
    expect("si-euler", 0.8, ("<=", 2))
    for name in ("lie-trotter", "strang"):
        for h, want in zip((0.1, 0.4, 0.8), (7, 7, 6)):
            expect(name, h, want)
    expect("exp-midpoint", 0.4, 6)
    expect("stormer-verlet", 0.1, 7)
    expect("stormer-verlet", 0.8, "unstable")
    for name in ("euler", "symplectic-euler"):
        for h in (0.1, 0.4, 0.8):
            expect(name, h, "unstable")

    _report("hodgkin-huxley spike counts", not failures,
            "all counts match" if not failures else "; ".join(failures))


def test_reduced_model_contrast(reduced_contrast):
    """Instantaneous sodium activation changes the spiking response."""
    want = {("full", 10.0): 7, ("full", 6.0): 1, ("full", 5.0): 1,
            ("reduced", 10.0): 8, ("reduced", 6.0): 7, ("reduced", 5.0): 1}
    bad = [f"{k}: got {reduced_contrast[k]}, want {v}"
           for k, v in want.items() if reduced_contrast[k] != v]
    detail = ", ".join(f"{m}@I={i:g}:{reduced_contrast[(m, i)]}"
                       for m, i in want)
    _report("reduced-model spike contrast", not bad,
            detail if not bad else "; ".join(bad))


def test_property_suite(vdp_nonstiff, hh_default, rng):
    """Structural identities: adjoints, symmetry, commuting reduction,
    gating bounds, conditional linearity, convergence orders."""
    problems = []

    # adjoint identity r*(z) r(-z) = 1 within 4 ulps
    zs = np.linspace(-10, 0.9, 797)
    for fk in (EXACT, FORWARD_EULER, BACKWARD_EULER):
        worst = max(abs(stability(adjoint(fk), z) * stability(fk, -z) - 1.0)
                    for z in zs)
        if worst > 4 * ULP:
            problems.append(f"adjoint identity {fk.tag}: {worst:.2e}")

    # time-symmetry of symmetric compositions, 100 random states per model
    for sys, mname, draw in [
        (vdp_nonstiff, "strang", lambda: rng.normal(0, 2, 2)),
        (vdp_nonstiff, "stormer-verlet", lambda: rng.normal(0, 2, 2)),
        (hh_default, "strang",
         lambda: np.array([rng.uniform(-90, 40), *rng.uniform(0.05, 0.95, 3)])),
        (hh_default, "stormer-verlet",
         lambda: np.array([rng.uniform(-90, 40), *rng.uniform(0.05, 0.95, 3)])),
    ]:
        m = make_method(mname, sys)
        for _ in range(100):
            s = State(0.0, draw())
            fwd = step(sys, m, s, 0.05)
            back = step(sys, m, State(0.0, fwd.x), -0.05)
            rel = np.abs(back.x - s.x) / np.maximum(np.abs(s.x), 1e-8)
            if rel.max() > 1e-10:
                problems.append(f"time-symmetry {sys.model_id}/{mname}: {rel.max():.2e}")
                break

    # constant coefficients: composition == Euler-type within 1e-15 relative
    def const_coeffs(t, x, i):
        return (-0.3, 0.7, 0.1)[i], (0.5, -1.1, 0.2)[i]

    sys_c = CondLinSystem(3, const_coeffs, ((0,), (1,), (2,)), ("a", "b", "c"))
    s = State(0.0, [0.9, -1.4, 2.2])
    for kinds in ([EXACT] * 3, [FORWARD_EULER, BACKWARD_EULER, EXACT]):
        comp = nonsym_composition_step(sys_c, nonsym_composition(kinds), s, 0.37)
        par = euler_type_step(sys_c, euler_type(kinds), s, 0.37)
        rel = np.abs(comp.x - par.x) / np.abs(par.x)
        if rel.max() > 1e-15:
            problems.append(f"commuting reduction: {rel.max():.2e}")

    # gating bounds under exact flows, 1e4 random draws
    draws = 10_000
    vs = rng.uniform(-120, 60, draws)
    hs = 10.0 ** rng.uniform(-3, 1, draws)
    gates = rng.uniform(0, 1, (draws, 3))
    worst_lo, worst_hi = 0.0, 1.0
    for v, h, g in zip(vs, hs, gates):
        s = State(0.0, np.array([v, *g]))
        for idx in (1, 2, 3):
            out = component_flow(hh_default, idx, s, h, EXACT)
            worst_lo = min(worst_lo, out.x[idx])
            worst_hi = max(worst_hi, out.x[idx])
    if worst_lo < -1e-15 or worst_hi > 1 + 1e-15:
        problems.append(f"gating bounds: [{worst_lo}, {worst_hi}]")

    # conditional linearity of both built-in models
    vdp_samples = [State(0.0, rng.normal(0, 2, 2)) for _ in range(10)]
    hh_samples = [State(rng.uniform(0, 200),
                        np.array([rng.uniform(-90, 40), *rng.uniform(0, 1, 3)]))
                  for _ in range(10)]
    if not check_conditional_linearity(vdp_nonstiff, vdp_samples, 1e-12):
        problems.append("vdp conditional linearity")
    if not check_conditional_linearity(hh_default, hh_samples, 1e-12):
        problems.append("hh conditional linearity")

    # order of accuracy: endpoint error slopes on [0, 1]
    ref = integrate(vdp_nonstiff, make_method("strang", vdp_nonstiff),
                    vdp_initial_state(), 1.0, 1e-5).x_end
    nominal = {"euler": 1, "exp-euler": 1, "si-euler": 1, "lie-trotter": 1,
               "symplectic-euler": 1, "strang": 2, "stormer-verlet": 2,
               "exp-midpoint": 2}
    for name, p in nominal.items():
        m = make_method(name, vdp_nonstiff)
        pts = [(h, float(np.linalg.norm(
            integrate(vdp_nonstiff, m, vdp_initial_state(), 1.0, h).x_end - ref)))
            for h in (0.02, 0.01, 0.005, 0.0025)]
        slope, _ = fit_loglog_slope(pts)
        if abs(slope - p) > 0.25:
            problems.append(f"order {name}: slope {slope:.2f} vs {p}")

    _report("property suite", not problems,
            "all properties hold" if not problems else "; ".join(problems))


def test_primary_runs_without_secondary():
    """The primary package must not touch plotting or the figs package."""
    import condlin
    import condlin.analysis
    import condlin.cli
    import condlin.core
    import condlin.experiments
    import condlin.integrators
    import condlin.models

    plotting = [m for m in _sys.modules if m.split(".")[0] in ("matplotlib", "figs")]
    _report("primary suite independent of secondary", not plotting,
            "no plotting modules loaded" if not plotting else f"loaded: {plotting}")
