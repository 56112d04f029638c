import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condlin.core import (
    BACKWARD_EULER,
    EXACT,
    FORWARD_EULER,
    CondLinSystem,
    State,
    adjoint,
    check_conditional_linearity,
    component_flow,
    custom_flow,
    exprel,
    group_flow,
    phi1,
    safe_exp,
    stability,
)
from condlin.models import CurrentProtocol, HHParams, hh_rest_state, hh_system

mpmath.mp.dps = 50

ULP = np.finfo(float).eps


def exprel_series(z: float) -> mpmath.mpf:
    # 30-term extended-precision series: sum_k z^k / (k+1)!
    z = mpmath.mpf(z)
    return mpmath.fsum(z ** k / mpmath.factorial(k + 1) for k in range(30))


class TestExprel:
    def test_removable_singularity(self):
        assert exprel(0.0) == 1.0

    def test_at_one(self):
        # oracle: (e - 1)/1
        assert exprel(1.0) == pytest.approx(1.718281828459045, abs=0, rel=1e-15)
        assert float(exprel_series(1.0)) == pytest.approx(exprel(1.0), rel=1e-15)

    def test_large_negative(self):
        # oracle: (1 - e^-20)/20 evaluated in extended precision
        expected = float((1 - mpmath.e ** -20) / 20)
        assert exprel(-20.0) == pytest.approx(expected, rel=1e-15)
        assert f"{exprel(-20.0):.14f}"[:13] == "0.04999999989"

    def test_overflow_returns_inf(self):
        assert exprel(1e4) == math.inf
        assert safe_exp(1e4) == math.inf

    @given(st.floats(-1.0, 1.0))
    @settings(max_examples=300)
    def test_series_agreement(self, z):
        expected = exprel_series(z)
        assert abs(exprel(z) - expected) <= 1e-14 * abs(expected)


class TestStability:
    def test_examples(self):
        assert stability(FORWARD_EULER, -2.0) == -1.0
        assert stability(BACKWARD_EULER, -1.0) == 0.5
        assert stability(EXACT, 0.0) == 1.0

    def test_backward_euler_pole(self):
        with pytest.raises(ZeroDivisionError):
            stability(BACKWARD_EULER, 1.0)
        with pytest.raises(ZeroDivisionError):
            phi1(BACKWARD_EULER, 1.0)

    @pytest.mark.parametrize("fk,c", [(EXACT, 1.0), (FORWARD_EULER, 0.0),
                                      (BACKWARD_EULER, 1.2)])
    def test_first_order_consistency(self, fk, c):
        # r(z) = 1 + z + O(z^2) with a kind-specific constant
        for z in np.linspace(-0.1, 0.1, 41):
            assert abs(stability(fk, z) - 1.0 - z) <= c * z * z + 1e-16

    def test_custom(self):
        fk = custom_flow(lambda z: 1.0 + z + 0.5 * z * z)
        assert stability(fk, 0.2) == pytest.approx(1.22)


class TestPhi1:
    def test_examples(self):
        assert phi1(FORWARD_EULER, -3.0) == 1.0
        assert phi1(EXACT, 0.0) == 1.0
        assert phi1(BACKWARD_EULER, -1.0) == 0.5  # (1/(1-z)-1)/z at z=-1

    def test_exact_equals_exprel(self):
        for z in (-30.0, -1.0, -1e-8, 0.0, 1e-8, 0.5):
            assert phi1(EXACT, z) == exprel(z)

    @pytest.mark.parametrize("fk", [EXACT, FORWARD_EULER, BACKWARD_EULER])
    def test_consistency_identity(self, fk):
        # z*phi1(z) + 1 = r(z), to a few ulps of the larger participating term
        for z in np.concatenate([np.linspace(-50, 0.9, 113), [-1e-9, 1e-12]]):
            lhs = z * phi1(fk, z) + 1.0
            rhs = stability(fk, z)
            scale = max(1.0, abs(lhs), abs(rhs))
            assert abs(lhs - rhs) <= 4 * ULP * scale

    def test_custom_quotient_and_fallback(self):
        fk = custom_flow(lambda z: math.exp(z))
        assert phi1(fk, 0.5) == pytest.approx(exprel(0.5), rel=1e-12)
        assert phi1(fk, 0.0) == 1.0
        # fallback region: 1 + z/2 matches the exponential's expansion
        assert phi1(fk, 1e-8) == pytest.approx(exprel(1e-8), rel=1e-12)
        fk2 = custom_flow(lambda z: 1.0 / (1.0 - z), phi=lambda z: 1.0 / (1.0 - z))
        assert phi1(fk2, -1.0) == 0.5


class TestAdjoint:
    def test_mapping(self):
        assert adjoint(FORWARD_EULER) is BACKWARD_EULER
        assert adjoint(BACKWARD_EULER) is FORWARD_EULER
        assert adjoint(EXACT) is EXACT
        assert adjoint(adjoint(BACKWARD_EULER)) is BACKWARD_EULER

    def test_custom_adjoint(self):
        fk = custom_flow(lambda z: 1.0 + z)  # forward Euler in disguise
        adj = adjoint(fk)
        for z in (-2.0, -0.5, 0.3):
            assert adj.r(z) == pytest.approx(1.0 / (1.0 - z), rel=1e-15)

    @pytest.mark.parametrize("fk", [EXACT, FORWARD_EULER, BACKWARD_EULER])
    @given(z=st.floats(-10.0, 0.9))
    @settings(max_examples=200)
    def test_adjoint_identity(self, fk, z):
        # r*(z) r(-z) = 1 within 4 ulps
        prod = stability(adjoint(fk), z) * stability(fk, -z)
        assert abs(prod - 1.0) <= 4 * ULP * max(1.0, abs(prod))


def _const_system(a, b):
    def coeffs(t, x, i):
        return a[i], b[i]

    return CondLinSystem(dim=len(a), coeffs=coeffs,
                         groups=tuple((i,) for i in range(len(a))),
                         labels=tuple(f"x{i}" for i in range(len(a))))


class TestComponentFlow:
    def test_reduces_to_euler_when_a_zero(self):
        sys = _const_system([0.0], [2.0])
        out = component_flow(sys, 0, State(0.0, [1.0]), 0.5, EXACT)
        assert out.x[0] == 2.0

    def test_exact_decay(self):
        sys = _const_system([-1.0], [0.0])
        out = component_flow(sys, 0, State(0.0, [1.0]), 1.0, EXACT)
        assert out.x[0] == pytest.approx(0.36787944117144233, rel=1e-15)

    def test_backward_euler_decay(self):
        sys = _const_system([-1.0], [0.0])
        out = component_flow(sys, 0, State(0.0, [1.0]), 1.0, BACKWARD_EULER)
        assert out.x[0] == 0.5

    def test_does_not_advance_time_or_other_components(self):
        sys = _const_system([-1.0, 0.0], [0.0, 1.0])
        s = State(3.0, [1.0, 5.0])
        out = component_flow(sys, 0, s, 0.25)
        assert out.t == 3.0
        assert out.x[1] == 5.0
        assert s.x[0] == 1.0  # input untouched

    @given(x0=st.floats(-3, 3), a=st.floats(-5, 5), b=st.floats(-3, 3),
           h=st.floats(-0.5, 0.5))
    @settings(max_examples=200)
    def test_forward_euler_is_explicit_euler(self, x0, a, b, h):
        sys = _const_system([a], [b])
        out = component_flow(sys, 0, State(0.0, [x0]), h, FORWARD_EULER)
        assert out.x[0] == (1.0 + h * a) * x0 + 1.0 * (h * b)

    def test_exact_flow_group_property(self):
        # h1 then h2 equals h1 + h2 when the exterior state is untouched
        sys = _const_system([-0.7], [0.3])
        s = State(0.0, [1.3])
        for h1, h2 in [(0.2, 0.5), (0.8, -0.3), (1.5, 1.5)]:
            two = component_flow(sys, 0, component_flow(sys, 0, s, h1), h2)
            one = component_flow(sys, 0, s, h1 + h2)
            assert two.x[0] == pytest.approx(one.x[0], rel=1e-13)

    def test_nonfinite_flags_divergence(self):
        sys = _const_system([2000.0], [0.0])
        out = component_flow(sys, 0, State(0.0, [1.0]), 1.0, EXACT)
        assert out.diverged and not math.isfinite(out.x[0])


class TestGroupFlow:
    def test_singleton_matches_component_flow(self):
        sys = _const_system([-1.0, 0.5], [0.2, 0.0])
        s = State(0.0, [1.0, 2.0])
        via_group = group_flow(sys, (1,), s, 0.3, [EXACT])
        via_component = component_flow(sys, 1, s, 0.3, EXACT)
        assert np.array_equal(via_group.x, via_component.x)

    def test_zero_step_is_identity(self):
        sys = hh_system()
        s = hh_rest_state()
        out = group_flow(sys, sys.groups[1], s, 0.0, [EXACT] * 3)
        assert np.array_equal(out.x, s.x)

    def test_hh_gating_group_commutes(self, rng):
        # sequential single-gate flows in any order agree with the group flow
        sys = hh_system()
        for _ in range(20):
            x = np.array([rng.uniform(-90, 40), *rng.uniform(0, 1, size=3)])
            s = State(0.0, x)
            grouped = group_flow(sys, (1, 2, 3), s, 0.7, [EXACT] * 3)
            for order in [(1, 2, 3), (3, 2, 1), (2, 1, 3)]:
                seq = s
                for i in order:
                    seq = component_flow(sys, i, seq, 0.7, EXACT)
                assert np.allclose(seq.x, grouped.x, rtol=0, atol=1e-15)


class TestConditionalLinearity:
    def test_builtin_models_pass(self, vdp_nonstiff, rng):
        samples = [State(0.0, rng.normal(0, 2, size=2)) for _ in range(8)]
        assert check_conditional_linearity(vdp_nonstiff, samples, tol=1e-12)

        hh = hh_system(HHParams(), CurrentProtocol(10.0))
        samples = [State(rng.uniform(0, 200),
                         np.array([rng.uniform(-90, 40), *rng.uniform(0, 1, 3)]))
                   for _ in range(8)]
        assert check_conditional_linearity(hh, samples, tol=1e-12)

    def test_broken_system_fails(self):
        def coeffs(t, x, i):
            if i == 0:
                return x[0], 1.0  # a_0 depends on x_0: not conditionally linear
            return 0.0, -x[0]

        bad = CondLinSystem(2, coeffs, ((0,), (1,)), ("x1", "x2"))
        assert not check_conditional_linearity(bad, [State(0.0, [1.0, 1.0])], 1e-12)

    def test_needs_samples(self):
        with pytest.raises(ValueError):
            check_conditional_linearity(hh_system(), [], 1e-12)


class TestValidation:
    def test_groups_must_partition(self):
        with pytest.raises(ValueError):
            CondLinSystem(2, lambda t, x, i: (0.0, 0.0), ((0,),), ("a", "b"))
        with pytest.raises(ValueError):
            CondLinSystem(2, lambda t, x, i: (0.0, 0.0), ((0,), (0, 1)), ("a", "b"))

    def test_labels_length(self):
        with pytest.raises(ValueError):
            CondLinSystem(2, lambda t, x, i: (0.0, 0.0), ((0,), (1,)), ("a",))
