"""Conditionally linear ODE systems and their closed-form component flows.

A conditionally linear system in R^d has components

    x_i' = a_i(t, x) x_i + b_i(t, x),      i = 0, ..., d-1,

where the coefficients a_i, b_i do not depend on x_i itself.  Freezing all
other components therefore leaves a scalar linear ODE with constant
coefficients, whose time-h flow is available in closed form:

    x_i(t + h) = exp(h a_i) x_i(t) + exprel(h a_i) h b_i.

Replacing exp(z) by the stability function r(z) of a one-step method gives
the corresponding approximate flow at the same cost.  Every integrator in
:mod:`condlin.integrators` is a composition of these single-component flows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "EXACT",
    "FORWARD_EULER",
    "BACKWARD_EULER",
    "FlowKind",
    "custom_flow",
    "State",
    "CondLinSystem",
    "safe_exp",
    "exprel",
    "stability",
    "phi1",
    "adjoint",
    "component_flow",
    "group_flow",
    "check_conditional_linearity",
]

# Largest z with exp(z) finite in double precision.  math.exp raises
# OverflowError past this; we want inf so divergence guards can catch it.
EXP_OVERFLOW = 709.782712893384


def safe_exp(z: float) -> float:
    """exp(z), returning inf instead of raising on overflow."""
    if z >= EXP_OVERFLOW:
        return math.inf
    return math.exp(z)


def exprel(z: float) -> float:
    """(exp(z) - 1)/z with the removable singularity at z = 0 filled by 1.

    Evaluated via expm1 so no accuracy is lost for small |z|.  Overflows to
    inf for very large positive z.
    """
    if z == 0.0:
        return 1.0
    if z >= EXP_OVERFLOW:
        return math.inf
    return math.expm1(z) / z


@dataclass(frozen=True)
class FlowKind:
    """An exact or approximate exponential, given by a stability map r(z).

    Any r with r(0) = 1 and r(z) = 1 + z + O(z^2) yields a consistent
    single-component flow.  The built-in kinds are module-level constants
    ``EXACT`` (r = exp), ``FORWARD_EULER`` (r = 1 + z) and ``BACKWARD_EULER``
    (r = 1/(1 - z)); use :func:`custom_flow` for anything else.
    """

    tag: str
    r: Callable[[float], float] | None = None
    phi: Callable[[float], float] | None = None

    def __repr__(self) -> str:
        return f"FlowKind({self.tag})"


EXACT = FlowKind("exact")
FORWARD_EULER = FlowKind("forward_euler")
BACKWARD_EULER = FlowKind("backward_euler")


def custom_flow(r: Callable[[float], float],
                phi: Callable[[float], float] | None = None) -> FlowKind:
    """Flow kind with a user-supplied stability map r(z).

    ``phi`` may give a numerically stable (r(z) - 1)/z; if omitted, a guarded
    quotient with a small-|z| Taylor fallback is used (the fallback assumes
    r''(0) is close to 1, which holds for exponential-like maps).
    """
    return FlowKind("custom", r=r, phi=phi)


def stability(fk: FlowKind, z: float) -> float:
    """The stability map r(z) of a flow kind.

    Raises ZeroDivisionError at the backward Euler pole z = 1.
    """
    if fk.tag == "exact":
        return safe_exp(z)
    if fk.tag == "forward_euler":
        return 1.0 + z
    if fk.tag == "backward_euler":
        if z == 1.0:
            raise ZeroDivisionError("backward Euler stability 1/(1 - z) has a pole at z = 1")
        return 1.0 / (1.0 - z)
    return fk.r(z)


def phi1(fk: FlowKind, z: float) -> float:
    """(r(z) - 1)/z with the removable singularity at z = 0 filled by 1.

    This is the coefficient multiplying h*b in the affine update; each
    built-in kind uses a closed form that is stable near z = 0.
    """
    if fk.tag == "exact":
        return exprel(z)
    if fk.tag == "forward_euler":
        return 1.0
    if fk.tag == "backward_euler":
        if z == 1.0:
            raise ZeroDivisionError("backward Euler stability 1/(1 - z) has a pole at z = 1")
        return 1.0 / (1.0 - z)
    if fk.phi is not None:
        return fk.phi(z)
    if z == 0.0:
        return 1.0
    if abs(z) < 1e-6:
        return 1.0 + 0.5 * z
    return (fk.r(z) - 1.0) / z


def adjoint(fk: FlowKind) -> FlowKind:
    """The adjoint flow kind, with stability map r*(z) = 1/r(-z).

    The exact flow is its own adjoint; forward and backward Euler swap.
    """
    if fk.tag == "exact":
        return EXACT
    if fk.tag == "forward_euler":
        return BACKWARD_EULER
    if fk.tag == "backward_euler":
        return FORWARD_EULER
    r = fk.r
    return FlowKind("custom", r=lambda z: 1.0 / r(-z))


@dataclass
class State:
    """A point (t, x) on a trajectory.

    ``diverged`` marks states containing non-finite entries produced by a
    flow; integration drivers stop when they see it.
    """

    t: float
    x: np.ndarray
    diverged: bool = False

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)

    def copy(self) -> "State":
        return State(self.t, self.x.copy(), self.diverged)


# Per-component coefficient evaluator: (t, x, i) -> (a_i, b_i).
CoeffFn = Callable[[float, np.ndarray, int], tuple[float, float]]


@dataclass(frozen=True)
class CondLinSystem:
    """A d-component conditionally linear vector field.

    ``coeffs(t, x, i)`` returns (a_i, b_i); both must be independent of x[i]
    (checked by :func:`check_conditional_linearity`, not per call).

    ``groups`` is an ordered partition of the component indices 0..d-1 into
    blocks whose single-component flows commute with each other when the
    rest of the state is frozen.  Composition methods apply one flow per
    group; the members of a group advance together from a shared coefficient
    evaluation.

    ``params`` and ``coeffs_all`` are optional hooks for the compiled
    integration loops in :mod:`condlin._fast`: ``coeffs_all`` is an njit
    function ``(t, x, a_out, b_out, params)`` filling all d coefficients at
    once, with ``params`` the flat parameter vector it reads.
    """

    dim: int
    coeffs: CoeffFn
    groups: tuple[tuple[int, ...], ...]
    labels: tuple[str, ...]
    model_id: str = ""
    params: tuple[float, ...] = ()
    coeffs_all: Callable | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        members = sorted(i for g in self.groups for i in g)
        if members != list(range(self.dim)):
            raise ValueError(f"groups {self.groups} are not a partition of 0..{self.dim - 1}")
        if len(self.labels) != self.dim:
            raise ValueError("need one label per component")

    def param_array(self) -> np.ndarray:
        return np.asarray(self.params, dtype=float)


def component_flow(sys: CondLinSystem, i: int, s: State, h: float,
                   fk: FlowKind = EXACT) -> State:
    """Advance component i by the time-h flow of its frozen-coefficient ODE.

    Coefficients are evaluated at (s.t, s.x); every other component and the
    time stamp are left untouched (steppers own the time bookkeeping).
    Negative h is allowed.
    """
    a, b = sys.coeffs(s.t, s.x, i)
    z = h * a
    xi = stability(fk, z) * s.x[i] + phi1(fk, z) * (h * b)
    x = s.x.copy()
    x[i] = xi
    return State(s.t, x, s.diverged or not math.isfinite(xi))


def group_flow(sys: CondLinSystem, g: Sequence[int], s: State, h: float,
               fks: Sequence[FlowKind]) -> State:
    """Advance every member of a commuting group by its time-h flow.

    All coefficients are evaluated at the incoming state, which is valid
    because member flows commute (their coefficients cannot depend on other
    members).  The result is therefore independent of member order.
    """
    ab = [sys.coeffs(s.t, s.x, i) for i in g]
    x = s.x.copy()
    diverged = s.diverged
    for i, fk, (a, b) in zip(g, fks, ab):
        z = h * a
        xi = stability(fk, z) * x[i] + phi1(fk, z) * (h * b)
        x[i] = xi
        diverged = diverged or not math.isfinite(xi)
    return State(s.t, x, diverged)


def check_conditional_linearity(sys: CondLinSystem, samples: Sequence[State],
                                tol: float = 1e-12) -> bool:
    """True iff no coefficient pair (a_i, b_i) responds to perturbing x_i.

    Each sample state is probed per component with relative (+-10%) and
    absolute (+-1) perturbations of x_i alone; any coefficient change above
    ``tol`` fails the check.
    """
    if not samples:
        raise ValueError("need at least one sample state")
    for s in samples:
        for i in range(sys.dim):
            a0, b0 = sys.coeffs(s.t, s.x, i)
            for xi in (s.x[i] * 1.1, s.x[i] * 0.9, s.x[i] + 1.0, s.x[i] - 1.0):
                x = s.x.copy()
                x[i] = xi
                a, b = sys.coeffs(s.t, x, i)
                if abs(a - a0) > tol or abs(b - b0) > tol:
                    return False
    return True
