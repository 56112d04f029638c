"""Compiled fixed-step integration loops.

The pure-Python steppers in :mod:`condlin.integrators` define the semantics;
the numba loops here compute the same arithmetic, expression for expression,
so that long small-step runs (reference trajectories, stiff sweeps) finish in
seconds.  A loop is used only when the system carries an njit coefficient
evaluator and every flow kind is one of the three built-ins; anything else
falls back to the Python path.

Inside kernels the backward-Euler pole 1/(1 - z) at z = 1 yields inf (numpy
error model) instead of raising; the guard in the driver turns that into a
divergence flag.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numba import njit

from .core import EXP_OVERFLOW, FlowKind

_EXACT, _FE, _BE = 0, 1, 2
_CODES = {"exact": _EXACT, "forward_euler": _FE, "backward_euler": _BE}


def _code(fk: FlowKind) -> int | None:
    return _CODES.get(fk.tag)


@njit(inline="always", error_model="numpy", cache=True)
def _exp(z):
    if z >= EXP_OVERFLOW:
        return math.inf
    return math.exp(z)


@njit(inline="always", error_model="numpy", cache=True)
def _exprel(z):
    if z == 0.0:
        return 1.0
    if z >= EXP_OVERFLOW:
        return math.inf
    return math.expm1(z) / z


@njit(inline="always", error_model="numpy")
def _stab(code, z):
    if code == _EXACT:
        return _exp(z)
    if code == _FE:
        return 1.0 + z
    return 1.0 / (1.0 - z)


@njit(inline="always", error_model="numpy")
def _phi1(code, z):
    if code == _EXACT:
        return _exprel(z)
    if code == _FE:
        return 1.0
    return 1.0 / (1.0 - z)


@njit(inline="always", error_model="numpy")
def _adj(code):
    if code == _EXACT:
        return _EXACT
    return 3 - code  # swaps forward and backward Euler


@njit(inline="always", error_model="numpy")
def _any_bad(x, guard):
    for i in range(x.shape[0]):
        v = x[i]
        if not math.isfinite(v) or abs(v) > guard:
            return True
    return False


@lru_cache(maxsize=None)
def _euler_loop(coeffs):
    @njit(error_model="numpy")
    def loop(x0, t0, h, n, stride, guard, kinds, p, out, xend):
        d = x0.shape[0]
        a = np.empty(d)
        b = np.empty(d)
        x = x0.copy()
        row = 1
        for k in range(n):
            t = t0 + k * h
            coeffs(t, x, a, b, p)
            for i in range(d):
                z = h * a[i]
                x[i] = _stab(kinds[i], z) * x[i] + _phi1(kinds[i], z) * (h * b[i])
            if _any_bad(x, guard):
                return k + 1
            if (k + 1) % stride == 0:
                for i in range(d):
                    out[row, i] = x[i]
                row += 1
        for i in range(d):
            xend[i] = x[i]
        return -1

    return loop


@lru_cache(maxsize=None)
def _midpoint_loop(coeffs):
    @njit(error_model="numpy")
    def loop(x0, t0, h, n, stride, guard, p, out, xend):
        d = x0.shape[0]
        a = np.empty(d)
        b = np.empty(d)
        x = x0.copy()
        xm = np.empty(d)
        row = 1
        for k in range(n):
            t = t0 + k * h
            coeffs(t, x, a, b, p)
            for i in range(d):
                z = 0.5 * h * a[i]
                xm[i] = _exp(z) * x[i] + _exprel(z) * (0.5 * h * b[i])
            coeffs(t + 0.5 * h, xm, a, b, p)
            for i in range(d):
                z = h * a[i]
                x[i] = _exp(z) * x[i] + _exprel(z) * (h * b[i])
            if _any_bad(x, guard):
                return k + 1
            if (k + 1) % stride == 0:
                for i in range(d):
                    out[row, i] = x[i]
                row += 1
        for i in range(d):
            xend[i] = x[i]
        return -1

    return loop


@lru_cache(maxsize=None)
def _composition_loop(coeffs):
    # seq1 is the application order; for symmetric steps seq2 holds the
    # adjoint return sweep and is empty for non-symmetric steps.
    @njit(error_model="numpy")
    def loop(x0, t0, h, n, stride, guard, gcodes, gstart, gmem, seq1, seq2,
             sub, p, out, xend):
        d = x0.shape[0]
        a = np.empty(d)
        b = np.empty(d)
        x = x0.copy()
        row = 1
        for k in range(n):
            t = t0 + k * h
            for s in range(seq1.shape[0]):
                gi = seq1[s]
                code = gcodes[gi]
                coeffs(t, x, a, b, p)
                for j in range(gstart[gi], gstart[gi + 1]):
                    i = gmem[j]
                    z = sub * h * a[i]
                    x[i] = _stab(code, z) * x[i] + _phi1(code, z) * (sub * h * b[i])
            for s in range(seq2.shape[0]):
                gi = seq2[s]
                code = _adj(gcodes[gi])
                coeffs(t, x, a, b, p)
                for j in range(gstart[gi], gstart[gi + 1]):
                    i = gmem[j]
                    z = sub * h * a[i]
                    x[i] = _stab(code, z) * x[i] + _phi1(code, z) * (sub * h * b[i])
            if _any_bad(x, guard):
                return k + 1
            if (k + 1) % stride == 0:
                for i in range(d):
                    out[row, i] = x[i]
                row += 1
        for i in range(d):
            xend[i] = x[i]
        return -1

    return loop


def _group_arrays(sys):
    gstart = np.zeros(len(sys.groups) + 1, dtype=np.int64)
    gmem = []
    for gi, g in enumerate(sys.groups):
        gmem.extend(g)
        gstart[gi + 1] = len(gmem)
    return gstart, np.asarray(gmem, dtype=np.int64)


def plan(sys, m):
    """Return a runner for (sys, method) if a compiled loop applies, else None.

    The runner signature is ``run(sys, m, s0, n, h, guard, stride)`` and it
    returns ``(states, diverged_at, x_end)`` exactly like the Python driver.
    """
    if sys.coeffs_all is None:
        return None

    if m.variant == "euler_type":
        codes = [_code(fk) for fk in m.component_kinds]
        if None in codes:
            return None
        kinds = np.asarray(codes, dtype=np.int64)
        loop = _euler_loop(sys.coeffs_all)

        def run(sys, m, s0, n, h, guard, stride):
            return _drive(loop, sys, s0, n, h, guard, stride, (kinds,))

        return run

    if m.variant == "exp_midpoint":
        loop = _midpoint_loop(sys.coeffs_all)

        def run(sys, m, s0, n, h, guard, stride):
            return _drive(loop, sys, s0, n, h, guard, stride, ())

        return run

    if m.variant in ("nonsym_composition", "sym_composition"):
        codes = [_code(fk) for fk in m.group_kinds]
        if None in codes:
            return None
        order = m.group_order if m.group_order is not None else tuple(range(len(sys.groups)))
        gcodes = np.asarray(codes, dtype=np.int64)
        gstart, gmem = _group_arrays(sys)
        if m.variant == "nonsym_composition":
            seq1 = np.asarray(order[::-1], dtype=np.int64)
            seq2 = np.empty(0, dtype=np.int64)
            sub = 1.0
        else:
            seq1 = np.asarray(order[::-1], dtype=np.int64)
            seq2 = np.asarray(order, dtype=np.int64)
            sub = 0.5
        loop = _composition_loop(sys.coeffs_all)

        def run(sys, m, s0, n, h, guard, stride):
            return _drive(loop, sys, s0, n, h, guard, stride,
                          (gcodes, gstart, gmem, seq1, seq2, sub))

        return run

    return None


def _drive(loop, sys, s0, n, h, guard, stride, extra):
    d = sys.dim
    x0 = np.asarray(s0.x, dtype=float)
    out = np.empty((n // stride + 1, d))
    out[0] = x0
    xend = np.empty(d)
    p = sys.param_array()
    div = loop(x0, float(s0.t), float(h), n, stride, float(guard), *extra, p, out, xend)
    if div == -1:
        rows = n // stride + 1
        return out[:rows], None, xend
    rows = (div - 1) // stride + 1
    return out[:rows].copy(), int(div), None
