"""One-step methods built from component flows, and the fixed-step driver.

Method families
---------------
* Euler-type: every component advanced in parallel from coefficients frozen
  at the step start, each with its own flow kind.  Exact kinds give the
  exponential Euler method, forward Euler kinds the classical Euler method,
  backward Euler kinds the semi-implicit (SI) Euler method.
* Exponential midpoint: a half-step of exponential Euler supplies midpoint
  coefficient values for a full exact-exponential update from the step start
  (two coefficient evaluations per component per step).
* Non-symmetric composition: one group flow after another, each seeing the
  freshest state.  Exact kinds give the Lie-Trotter splitting; forward/
  backward Euler kinds give the symplectic Euler method.
* Symmetric composition: half-steps of the groups in reverse order, then
  half-steps in forward order with adjoint kinds.  Exact kinds give Strang
  splitting; forward/backward Euler kinds give Stormer/Verlet.
* Hybrid partitioned: groups partitioned into blocks; an Euler-type update
  across blocks (all blocks advance from the same incoming state) with a
  composition inside each block.

All coefficient evaluations inside one step use the step's starting time
(inputs such as an applied current are treated as constant over a step);
the exponential midpoint's second stage, which uses t + h/2, is the one
exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import (
    BACKWARD_EULER,
    EXACT,
    FORWARD_EULER,
    CondLinSystem,
    FlowKind,
    State,
    adjoint,
    group_flow,
    phi1,
    stability,
)

__all__ = [
    "Method",
    "Trajectory",
    "euler_type",
    "exp_midpoint",
    "nonsym_composition",
    "sym_composition",
    "hybrid",
    "make_method",
    "METHOD_NAMES",
    "euler_type_step",
    "exp_midpoint_step",
    "nonsym_composition_step",
    "sym_composition_step",
    "hybrid_step",
    "step",
    "integrate",
    "reference_integrate",
    "reference_step_size",
    "DEFAULT_GUARD",
]

DEFAULT_GUARD = 1e6


@dataclass(frozen=True)
class Method:
    """A one-step integrator specification.

    ``variant`` selects the family; the remaining fields carry per-variant
    data.  ``component_kinds`` (one per component) configures Euler-type
    methods; ``group_kinds`` (one per group) configures compositions and
    hybrids; ``group_order`` is the written composition order as indices
    into ``sys.groups`` (applied right-to-left); ``blocks`` partitions group
    indices for the hybrid family.
    """

    variant: str
    component_kinds: tuple[FlowKind, ...] | None = None
    group_kinds: tuple[FlowKind, ...] | None = None
    group_order: tuple[int, ...] | None = None
    blocks: tuple[tuple[int, ...], ...] | None = None
    symmetric_blocks: bool = False
    name: str = ""


def euler_type(kinds: Sequence[FlowKind], name: str = "") -> Method:
    return Method("euler_type", component_kinds=tuple(kinds), name=name)


def exp_midpoint(name: str = "exp-midpoint") -> Method:
    return Method("exp_midpoint", name=name)


def nonsym_composition(kinds: Sequence[FlowKind],
                       order: Sequence[int] | None = None,
                       name: str = "") -> Method:
    return Method("nonsym_composition", group_kinds=tuple(kinds),
                  group_order=None if order is None else tuple(order), name=name)


def sym_composition(kinds: Sequence[FlowKind],
                    order: Sequence[int] | None = None,
                    name: str = "") -> Method:
    return Method("sym_composition", group_kinds=tuple(kinds),
                  group_order=None if order is None else tuple(order), name=name)


def hybrid(blocks: Sequence[Sequence[int]], kinds: Sequence[FlowKind],
           symmetric: bool = False, name: str = "") -> Method:
    return Method("hybrid", group_kinds=tuple(kinds),
                  blocks=tuple(tuple(b) for b in blocks),
                  symmetric_blocks=symmetric, name=name)


METHOD_NAMES = (
    "euler",
    "exp-euler",
    "si-euler",
    "exp-midpoint",
    "lie-trotter",
    "symplectic-euler",
    "strang",
    "stormer-verlet",
    "hybrid",
)


def make_method(name: str, sys: CondLinSystem) -> Method:
    """Build one of the named standard methods for a given system.

    The composition methods assign kinds per group in ``sys.groups`` order;
    symplectic Euler and Stormer/Verlet use a forward Euler flow for the
    first group and backward Euler flows for the rest.
    """
    d, ng = sys.dim, len(sys.groups)
    if name == "euler":
        return euler_type([FORWARD_EULER] * d, name=name)
    if name == "exp-euler":
        return euler_type([EXACT] * d, name=name)
    if name == "si-euler":
        return euler_type([BACKWARD_EULER] * d, name=name)
    if name == "exp-midpoint":
        return exp_midpoint(name=name)
    if name == "lie-trotter":
        return nonsym_composition([EXACT] * ng, name=name)
    if name == "symplectic-euler":
        return nonsym_composition([FORWARD_EULER] + [BACKWARD_EULER] * (ng - 1), name=name)
    if name == "strang":
        return sym_composition([EXACT] * ng, name=name)
    if name == "stormer-verlet":
        return sym_composition([FORWARD_EULER] + [BACKWARD_EULER] * (ng - 1), name=name)
    if name == "hybrid":
        # first group alone, remaining groups as one block
        blocks = [(0,)] + ([tuple(range(1, ng))] if ng > 1 else [])
        return hybrid(blocks, [EXACT] * ng, name=name)
    raise ValueError(f"unknown method {name!r}; choose from {METHOD_NAMES}")


def _validate_order(m: Method, sys: CondLinSystem) -> tuple[int, ...]:
    order = m.group_order if m.group_order is not None else tuple(range(len(sys.groups)))
    if sorted(order) != list(range(len(sys.groups))):
        raise ValueError(f"group order {order} is not a permutation of the {len(sys.groups)} groups")
    return order


def euler_type_step(sys: CondLinSystem, m: Method, s: State, h: float) -> State:
    """Advance all components in parallel from coefficients frozen at s."""
    kinds = m.component_kinds
    x = s.x.copy()
    diverged = s.diverged
    for i in range(sys.dim):
        a, b = sys.coeffs(s.t, s.x, i)
        z = h * a
        xi = stability(kinds[i], z) * s.x[i] + phi1(kinds[i], z) * (h * b)
        x[i] = xi
        diverged = diverged or not math.isfinite(xi)
    return State(s.t + h, x, diverged)


def exp_midpoint_step(sys: CondLinSystem, s: State, h: float) -> State:
    """Exponential midpoint: half-step of exponential Euler, then a full
    exact update from s with coefficients evaluated at (t + h/2, midpoint)."""
    xm = s.x.copy()
    for i in range(sys.dim):
        a, b = sys.coeffs(s.t, s.x, i)
        z = 0.5 * h * a
        xm[i] = stability(EXACT, z) * s.x[i] + phi1(EXACT, z) * (0.5 * h * b)
    tm = s.t + 0.5 * h
    x = s.x.copy()
    diverged = s.diverged
    for i in range(sys.dim):
        a, b = sys.coeffs(tm, xm, i)
        z = h * a
        xi = stability(EXACT, z) * s.x[i] + phi1(EXACT, z) * (h * b)
        x[i] = xi
        diverged = diverged or not math.isfinite(xi)
    return State(s.t + h, x, diverged)


def _compose(sys: CondLinSystem, group_seq: Sequence[int],
             kinds: Sequence[FlowKind], s: State, h: float,
             symmetric: bool) -> State:
    """Apply the written composition over ``group_seq`` rightmost-first.

    Non-symmetric: full steps of groups in reversed written order.
    Symmetric: half-steps in reversed order, then half-steps in written
    order with adjoint kinds.
    """
    st = s
    if not symmetric:
        for gi in reversed(group_seq):
            g = sys.groups[gi]
            st = group_flow(sys, g, st, h, [kinds[gi]] * len(g))
        return st
    for gi in reversed(group_seq):
        g = sys.groups[gi]
        st = group_flow(sys, g, st, 0.5 * h, [kinds[gi]] * len(g))
    for gi in group_seq:
        g = sys.groups[gi]
        fk = adjoint(kinds[gi])
        st = group_flow(sys, g, st, 0.5 * h, [fk] * len(g))
    return st


def nonsym_composition_step(sys: CondLinSystem, m: Method, s: State, h: float) -> State:
    """Sequential group flows, last written group first, freshest state each."""
    order = _validate_order(m, sys)
    st = _compose(sys, order, m.group_kinds, s, h, symmetric=False)
    return State(s.t + h, st.x, st.diverged)


def sym_composition_step(sys: CondLinSystem, m: Method, s: State, h: float) -> State:
    """Symmetric composition: reversed half-sweep, then adjoint half-sweep."""
    order = _validate_order(m, sys)
    st = _compose(sys, order, m.group_kinds, s, h, symmetric=True)
    return State(s.t + h, st.x, st.diverged)


def hybrid_step(sys: CondLinSystem, m: Method, s: State, h: float) -> State:
    """Composition inside each block, all blocks advancing from the same s.

    Blocks are independent (safe to evaluate concurrently); their results
    are merged componentwise.  One block reduces to the plain composition;
    all-singleton blocks reduce to the Euler-type method.
    """
    blocks = m.blocks
    seen = sorted(gi for b in blocks for gi in b)
    if seen != list(range(len(sys.groups))):
        raise ValueError(f"blocks {blocks} do not partition the {len(sys.groups)} groups")
    x = s.x.copy()
    diverged = s.diverged
    for block in blocks:
        st = _compose(sys, block, m.group_kinds, s, h, m.symmetric_blocks)
        for gi in block:
            for i in sys.groups[gi]:
                x[i] = st.x[i]
        diverged = diverged or st.diverged
    return State(s.t + h, x, diverged)


def step(sys: CondLinSystem, m: Method, s: State, h: float) -> State:
    """Apply one step of any method variant."""
    if m.variant == "euler_type":
        return euler_type_step(sys, m, s, h)
    if m.variant == "exp_midpoint":
        return exp_midpoint_step(sys, s, h)
    if m.variant == "nonsym_composition":
        return nonsym_composition_step(sys, m, s, h)
    if m.variant == "sym_composition":
        return sym_composition_step(sys, m, s, h)
    if m.variant == "hybrid":
        return hybrid_step(sys, m, s, h)
    raise ValueError(f"unknown method variant {m.variant!r}")


@dataclass
class Trajectory:
    """Uniform-grid time series produced by :func:`integrate`.

    ``states`` holds every ``stride``-th state (including the initial one),
    so recorded samples sit at t0 + k*(stride*h).  ``diverged_at`` is the
    raw step index of the first state that was non-finite or out of the
    guard bound; states past it are not recorded.  ``x_end`` is the final
    computed state of a completed run regardless of stride alignment.
    """

    t0: float
    h: float
    states: np.ndarray
    stride: int = 1
    diverged_at: int | None = None
    method_id: str = ""
    model_id: str = ""
    x_end: np.ndarray | None = None

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    @property
    def dt(self) -> float:
        """Spacing of the recorded samples."""
        return self.h * self.stride

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.states))


def _grid_steps(t0: float, t_end: float, h: float) -> int:
    if not (h > 0):
        raise ValueError(f"step size must be positive, got {h}")
    if not t_end > t0:
        raise ValueError(f"t_end={t_end} must exceed t0={t0}")
    return int(round((t_end - t0) / h))


def integrate(sys: CondLinSystem, m: Method, s0: State, t_end: float, h: float,
              guard: float = DEFAULT_GUARD, stride: int = 1) -> Trajectory:
    """Fixed-step integration on the grid t0 + k*h, k = 0..round((t_end-t0)/h).

    h is never adjusted; t_end is trimmed to the grid.  Integration stops
    early, with ``diverged_at`` set, as soon as a state has a non-finite
    entry or any |x_i| > guard.  ``stride`` thins the recorded states (the
    stepping itself always uses h).

    When the system carries compiled coefficient evaluators and the method
    maps onto a compiled loop, a numba fast path is used; it computes the
    same arithmetic as the pure-Python steppers.
    """
    n = _grid_steps(s0.t, t_end, h)
    if stride < 1:
        raise ValueError("stride must be >= 1")

    from . import _fast

    loop = _fast.plan(sys, m)
    if loop is not None:
        states, diverged_at, x_end = loop(sys, m, s0, n, h, guard, stride)
    else:
        states, diverged_at, x_end = _integrate_py(sys, m, s0, n, h, guard, stride)
    return Trajectory(t0=s0.t, h=h, states=states, stride=stride,
                      diverged_at=diverged_at, method_id=m.name or m.variant,
                      model_id=sys.model_id, x_end=x_end)


def _bad(x: np.ndarray, guard: float, flagged: bool) -> bool:
    if flagged:
        return True
    for v in x:
        if not math.isfinite(v) or abs(v) > guard:
            return True
    return False


def _integrate_py(sys, m, s0, n, h, guard, stride):
    t0 = s0.t
    rows = [s0.x.copy()]
    s = s0.copy()
    s.diverged = False
    diverged_at = None
    for k in range(1, n + 1):
        s = step(sys, m, s, h)
        s.t = t0 + k * h  # keep the grid exact; accumulated sums drift
        if _bad(s.x, guard, s.diverged):
            diverged_at = k
            break
        if k % stride == 0:
            rows.append(s.x.copy())
    x_end = None if diverged_at is not None else s.x.copy()
    return np.array(rows), diverged_at, x_end


def reference_step_size(sys: CondLinSystem) -> float:
    """Reference step size per model: small enough that the Strang-splitting
    reference is converged well below every experimental step size."""
    if sys.model_id.startswith("vdp"):
        eps = sys.params[0] if sys.params else 0.0
        return 1e-4 if abs(eps) < 1.0 else 1e-5
    return 1e-4


def reference_integrate(sys: CondLinSystem, s0: State, t_end: float,
                        stride: int | None = None,
                        guard: float = DEFAULT_GUARD) -> Trajectory:
    """Ground-truth trajectory: Strang splitting (all-exact symmetric
    composition) at the model's reference step size.

    ``stride`` defaults to whatever keeps roughly 4e5 recorded samples.
    """
    h = reference_step_size(sys)
    n = _grid_steps(s0.t, t_end, h)
    if stride is None:
        stride = max(1, int(round(n / 400_000)))
    m = make_method("strang", sys)
    traj = integrate(sys, m, s0, t_end, h, guard=guard, stride=stride)
    traj.method_id = "reference"
    return traj
