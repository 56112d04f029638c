"""Built-in conditionally linear models: Van der Pol and Hodgkin-Huxley.

Van der Pol:

    x1' = x2
    x2' = eps (1 - x1^2) x2 - x1

with the stable limit cycle of radius ~2 for 0 < eps << 1 and the
relaxation oscillation hugging the cubic nullcline (in Lienard coordinates)
for eps >> 1.

Hodgkin-Huxley (squid giant axon, voltage in mV, time in ms, resting
potential -65 mV):

    C V' = I(t) - gK n^4 (V - EK) - gNa m^3 h (V - ENa) - gL (V - EL)
    g'   = alpha_g(V) (1 - g) - beta_g(V) g        for g in {n, m, h}

Each equation is linear in its own variable, so both models fit the
conditionally linear form.  The gate flows commute with one another at
frozen V, giving the group structure ({V}, {n, m, h}).

The reduced model with instantaneous sodium activation (m = m_inf(V)) is
exposed as stepping functions only: substituting m_inf(V) into the voltage
equation destroys conditional linearity, so composition methods do not
apply to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._fast import _exp as _nb_exp, _exprel as _nb_exprel
from .core import (
    BACKWARD_EULER,
    EXACT,
    CondLinSystem,
    State,
    exprel,
    safe_exp,
)
from .integrators import (
    Method,
    Trajectory,
    euler_type,
    exp_midpoint_step,
    euler_type_step,
    integrate,
    DEFAULT_GUARD,
)

__all__ = [
    "VdpParams",
    "HHParams",
    "CurrentProtocol",
    "vdp_system",
    "vdp_initial_state",
    "lienard",
    "action_angle",
    "hh_rates",
    "hh_system",
    "hh_rest_state",
    "m_inf",
    "REDUCED_VARIANTS",
    "reduced_hh_step",
    "reduced_rest_state",
    "integrate_reduced",
]


@dataclass(frozen=True)
class VdpParams:
    """Van der Pol damping parameter; eps > 0 has the attracting limit cycle."""

    epsilon: float


@dataclass(frozen=True)
class HHParams:
    """Membrane capacitance, channel conductances and reversal potentials."""

    C: float = 1.0
    gK: float = 36.0
    gNa: float = 120.0
    gL: float = 0.3
    EK: float = -77.0
    ENa: float = 55.0
    EL: float = -61.0

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise ValueError("capacitance must be positive")
        if min(self.gK, self.gNa, self.gL) < 0:
            raise ValueError("conductances must be nonnegative")


@dataclass(frozen=True)
class CurrentProtocol:
    """Square current pulse: i_on on [t_on, t_off), zero elsewhere."""

    i_on: float
    t_on: float = 50.0
    t_off: float = 150.0

    def __post_init__(self) -> None:
        if not self.t_on < self.t_off:
            raise ValueError("need t_on < t_off")

    def current(self, t: float) -> float:
        return self.i_on if self.t_on <= t < self.t_off else 0.0


# --------------------------------------------------------------------------
# Van der Pol

@njit(error_model="numpy", cache=True)
def _vdp_coeffs_all(t, x, a, b, p):
    eps = p[0]
    a[0] = 0.0
    b[0] = x[1]
    a[1] = eps * (1.0 - x[0] * x[0])
    b[1] = -x[0]


def vdp_system(p: VdpParams) -> CondLinSystem:
    """The Van der Pol oscillator as a conditionally linear system.

    Groups ({x1}, {x2}), in that order, so composition methods update x2
    first and then x1 with the fresh x2.
    """
    eps = p.epsilon

    def coeffs(t, x, i):
        if i == 0:
            return 0.0, x[1]
        return eps * (1.0 - x[0] * x[0]), -x[0]

    return CondLinSystem(
        dim=2,
        coeffs=coeffs,
        groups=((0,), (1,)),
        labels=("x1", "x2"),
        model_id="vdp",
        params=(eps,),
        coeffs_all=_vdp_coeffs_all,
    )


def vdp_initial_state(x1: float = 1.0, x2: float = 0.0) -> State:
    return State(0.0, np.array([x1, x2]))


def lienard(x: np.ndarray, epsilon: float) -> tuple[float, float]:
    """Lienard coordinates (y1, y2) = (x1, x1 - x1^3/3 - x2/eps).

    In these coordinates the stiff limit cycle tracks the cubic nullcline
    y2 = y1 - y1^3/3.
    """
    if epsilon == 0.0:
        raise ValueError("Lienard transform is undefined for epsilon = 0")
    x1, x2 = float(x[0]), float(x[1])
    return x1, x1 - x1 ** 3 / 3.0 - x2 / epsilon


def action_angle(x1: float, x2: float) -> tuple[float, float, bool]:
    """Action-angle coordinates: x1 = sqrt(2a) cos(theta), x2 = sqrt(2a) sin(theta).

    Returns (a, theta, defined); at the origin the angle is undefined and
    (0, 0, False) is returned.
    """
    a = 0.5 * (x1 * x1 + x2 * x2)
    if x1 == 0.0 and x2 == 0.0:
        return 0.0, 0.0, False
    return a, math.atan2(x2, x1), True


# --------------------------------------------------------------------------
# Hodgkin-Huxley

def hh_rates(V: float) -> tuple[float, float, float, float, float, float]:
    """Gate rate functions (alpha_n, beta_n, alpha_m, beta_m, alpha_h, beta_h).

    The two quotient-form alphas are evaluated through exprel, which fills
    their removable singularities (alpha_n at V = -55, alpha_m at V = -40).
    Rates are per ms with V in mV.
    """
    an = 0.1 / exprel((-55.0 - V) / 10.0)
    bn = 0.125 * safe_exp((-65.0 - V) / 80.0)
    am = 1.0 / exprel((-40.0 - V) / 10.0)
    bm = 4.0 * safe_exp((-65.0 - V) / 18.0)
    ah = 0.07 * safe_exp((-65.0 - V) / 20.0)
    bh = 1.0 / (safe_exp((-35.0 - V) / 10.0) + 1.0)
    return an, bn, am, bm, ah, bh


# params layout shared by the compiled HH evaluators
_HH_P = ("C", "gK", "gNa", "gL", "EK", "ENa", "EL", "i_on", "t_on", "t_off")


@njit(error_model="numpy", cache=True)
def _hh_coeffs_all(t, x, a, b, p):
    V = x[0]
    n = x[1]
    m = x[2]
    hg = x[3]
    an = 0.1 / _nb_exprel((-55.0 - V) / 10.0)
    bn = 0.125 * _nb_exp((-65.0 - V) / 80.0)
    am = 1.0 / _nb_exprel((-40.0 - V) / 10.0)
    bm = 4.0 * _nb_exp((-65.0 - V) / 18.0)
    ah = 0.07 * _nb_exp((-65.0 - V) / 20.0)
    bh = 1.0 / (_nb_exp((-35.0 - V) / 10.0) + 1.0)
    cur = p[7] if (t >= p[8]) and (t < p[9]) else 0.0
    n2 = n * n
    gk = p[1] * (n2 * n2)
    gna = p[2] * (((m * m) * m) * hg)
    a[0] = -(gk + gna + p[3]) / p[0]
    b[0] = (cur + gk * p[4] + gna * p[5] + p[3] * p[6]) / p[0]
    a[1] = -(an + bn)
    b[1] = an
    a[2] = -(am + bm)
    b[2] = am
    a[3] = -(ah + bh)
    b[3] = ah


def hh_system(p: HHParams = HHParams(),
              proto: CurrentProtocol = CurrentProtocol(10.0)) -> CondLinSystem:
    """The four-component Hodgkin-Huxley neuron, components (V, n, m, h).

    Groups ({V}, {n, m, h}): the gates evolve independently of one another
    at frozen V, so their flows commute and form one group.
    """

    def coeffs(t, x, i):
        V = x[0]
        if i == 0:
            n = x[1]
            m = x[2]
            hg = x[3]
            n2 = n * n
            gk = p.gK * (n2 * n2)
            gna = p.gNa * (((m * m) * m) * hg)
            a = -(gk + gna + p.gL) / p.C
            b = (proto.current(t) + gk * p.EK + gna * p.ENa + p.gL * p.EL) / p.C
            return a, b
        if i == 1:
            an = 0.1 / exprel((-55.0 - V) / 10.0)
            bn = 0.125 * safe_exp((-65.0 - V) / 80.0)
            return -(an + bn), an
        if i == 2:
            am = 1.0 / exprel((-40.0 - V) / 10.0)
            bm = 4.0 * safe_exp((-65.0 - V) / 18.0)
            return -(am + bm), am
        ah = 0.07 * safe_exp((-65.0 - V) / 20.0)
        bh = 1.0 / (safe_exp((-35.0 - V) / 10.0) + 1.0)
        return -(ah + bh), ah

    return CondLinSystem(
        dim=4,
        coeffs=coeffs,
        groups=((0,), (1, 2, 3)),
        labels=("V", "n", "m", "h"),
        model_id="hh",
        params=(p.C, p.gK, p.gNa, p.gL, p.EK, p.ENa, p.EL,
                proto.i_on, proto.t_on, proto.t_off),
        coeffs_all=_hh_coeffs_all,
    )


def _gate_steady(alpha: float, beta: float) -> float:
    return alpha / (alpha + beta)


def hh_rest_state(p: HHParams = HHParams()) -> State:
    """V = -65 mV with every gate at its steady-state value there."""
    an, bn, am, bm, ah, bh = hh_rates(-65.0)
    return State(0.0, np.array([
        -65.0,
        _gate_steady(an, bn),
        _gate_steady(am, bm),
        _gate_steady(ah, bh),
    ]))


def m_inf(V: float) -> float:
    """Steady-state sodium activation alpha_m/(alpha_m + beta_m)."""
    _, _, am, bm, _, _ = hh_rates(V)
    return _gate_steady(am, bm)


# --------------------------------------------------------------------------
# Reduced model: instantaneous sodium activation, state (V, n, h)

REDUCED_VARIANTS = ("exp-euler", "si-euler", "exp-midpoint")


@njit(error_model="numpy", cache=True)
def _hh_reduced_coeffs_all(t, x, a, b, p):
    V = x[0]
    n = x[1]
    hg = x[2]
    an = 0.1 / _nb_exprel((-55.0 - V) / 10.0)
    bn = 0.125 * _nb_exp((-65.0 - V) / 80.0)
    am = 1.0 / _nb_exprel((-40.0 - V) / 10.0)
    bm = 4.0 * _nb_exp((-65.0 - V) / 18.0)
    ah = 0.07 * _nb_exp((-65.0 - V) / 20.0)
    bh = 1.0 / (_nb_exp((-35.0 - V) / 10.0) + 1.0)
    m = am / (am + bm)
    cur = p[7] if (t >= p[8]) and (t < p[9]) else 0.0
    n2 = n * n
    gk = p[1] * (n2 * n2)
    gna = p[2] * (((m * m) * m) * hg)
    a[0] = -(gk + gna + p[3]) / p[0]
    b[0] = (cur + gk * p[4] + gna * p[5] + p[3] * p[6]) / p[0]
    a[1] = -(an + bn)
    b[1] = an
    a[2] = -(ah + bh)
    b[2] = ah


def _reduced_pseudo_system(p: HHParams, proto: CurrentProtocol) -> CondLinSystem:
    # Internal only.  a_V depends on V through m_inf(V), so this object is
    # NOT conditionally linear; it exists so the Euler-type and midpoint
    # update formulas (and their compiled loops) can be reused, with m
    # re-frozen from V at every coefficient evaluation.

    def coeffs(t, x, i):
        V = x[0]
        if i == 0:
            n = x[1]
            hg = x[2]
            am = 1.0 / exprel((-40.0 - V) / 10.0)
            bm = 4.0 * safe_exp((-65.0 - V) / 18.0)
            m = am / (am + bm)
            n2 = n * n
            gk = p.gK * (n2 * n2)
            gna = p.gNa * (((m * m) * m) * hg)
            a = -(gk + gna + p.gL) / p.C
            b = (proto.current(t) + gk * p.EK + gna * p.ENa + p.gL * p.EL) / p.C
            return a, b
        if i == 1:
            an = 0.1 / exprel((-55.0 - V) / 10.0)
            bn = 0.125 * safe_exp((-65.0 - V) / 80.0)
            return -(an + bn), an
        ah = 0.07 * safe_exp((-65.0 - V) / 20.0)
        bh = 1.0 / (safe_exp((-35.0 - V) / 10.0) + 1.0)
        return -(ah + bh), ah

    return CondLinSystem(
        dim=3,
        coeffs=coeffs,
        groups=((0,), (1,), (2,)),
        labels=("V", "n", "h"),
        model_id="hh-reduced",
        params=(p.C, p.gK, p.gNa, p.gL, p.EK, p.ENa, p.EL,
                proto.i_on, proto.t_on, proto.t_off),
        coeffs_all=_hh_reduced_coeffs_all,
    )


def reduced_rest_state(p: HHParams = HHParams()) -> State:
    """Reduced-model rest: V = -65 with n and h at steady state."""
    an, bn, _, _, ah, bh = hh_rates(-65.0)
    return State(0.0, np.array([-65.0, _gate_steady(an, bn), _gate_steady(ah, bh)]))


def _reduced_method(variant: str, dim: int = 3) -> Method:
    if variant == "exp-euler":
        return euler_type([EXACT] * dim, name="exp-euler")
    if variant == "si-euler":
        return euler_type([BACKWARD_EULER] * dim, name="si-euler")
    if variant == "exp-midpoint":
        return Method("exp_midpoint", name="exp-midpoint")
    raise ValueError(
        f"method {variant!r} is not available for the reduced model "
        f"(it is not conditionally linear, so splitting/composition methods "
        f"do not apply); choose from {REDUCED_VARIANTS}")


def reduced_hh_step(p: HHParams, proto: CurrentProtocol, s: State, h: float,
                    variant: str) -> State:
    """One step of the m = m_inf(V) reduced model, state (V, n, h).

    m is frozen to m_inf(V) at the start of the step and, for the midpoint
    variant, re-frozen to m_inf of the half-step voltage for the second
    stage.  Only the Euler-type and exponential midpoint variants exist.
    """
    sysr = _reduced_pseudo_system(p, proto)
    m = _reduced_method(variant)
    if m.variant == "exp_midpoint":
        return exp_midpoint_step(sysr, s, h)
    return euler_type_step(sysr, m, s, h)


def integrate_reduced(p: HHParams, proto: CurrentProtocol, s0: State,
                      t_end: float, h: float, variant: str,
                      guard: float = DEFAULT_GUARD, stride: int = 1) -> Trajectory:
    """Fixed-step driver for the reduced model (same contract as integrate)."""
    sysr = _reduced_pseudo_system(p, proto)
    m = _reduced_method(variant)
    traj = integrate(sysr, m, s0, t_end, h, guard=guard, stride=stride)
    traj.method_id = variant
    return traj
