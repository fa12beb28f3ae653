import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lateral_ovm.model import (
    ModelParams,
    NeighborView,
    acceleration,
    lateral_optimal_velocity,
    lateral_velocity_difference,
    optimal_velocity,
    ov_derivative,
)
from lateral_ovm.validation import check_derivatives, richardson_diff

from conftest import make_params

P = make_params(alpha=2.85, p=1.0, q=0.0, lambda1=0.2)
# mpmath (40 digits): 2*tanh(7), 2*(1 + tanh 7), 2.85*(V(6.9) - 2*tanh(7))
V7 = 1.9999966738878893435
V_INF = 3.9999966738878893435
ACC_69 = -0.56810756936224815757


def test_optimal_velocity_examples():
    assert optimal_velocity(0.0, P) == 0.0
    assert optimal_velocity(7.0, P) == pytest.approx(V7, rel=1e-15)
    assert optimal_velocity(1e6, P) == pytest.approx(V_INF, rel=1e-15)


def test_lateral_gate():
    assert lateral_optimal_velocity(7.0, P) == pytest.approx(V7, rel=1e-15)
    assert lateral_optimal_velocity(12.0, P) == 0.0
    assert lateral_optimal_velocity(4.999, P) == 0.0
    # bounds: [l_v, d)
    assert lateral_optimal_velocity(5.0, P) > 0
    assert lateral_optimal_velocity(10.0, P) == 0.0
    assert np.array_equal(lateral_optimal_velocity(np.array([4.0, 7.0, 11.0]), P) == 0, [True, False, True])


def test_lateral_velocity_difference():
    view = NeighborView(v_self=2.0, headway=7.0, v_lead=2.0, lateral_headway=7.0, v_lateral_lead=3.0)
    assert lateral_velocity_difference(view, P) == 1.0
    closed = NeighborView(2.0, 7.0, 2.0, 11.0, 3.0)
    assert lateral_velocity_difference(closed, P) == 0.0
    same = NeighborView(2.0, 7.0, 2.0, 7.0, 2.0)
    assert lateral_velocity_difference(same, P) == 0.0


def test_acceleration_steady_state():
    params = make_params(alpha=2.85, p=0.8, q=0.2, lambda1=0.16, lambda2=0.04)
    v = params.p * optimal_velocity(7.0, params) + params.q * lateral_optimal_velocity(7.0, params)
    assert acceleration(NeighborView(v, 7.0, v, 7.0, v), params) == 0.0


def test_acceleration_oracle_value():
    view = NeighborView(v_self=2 * math.tanh(7), headway=6.9, v_lead=2 * math.tanh(7),
                        lateral_headway=7.0, v_lateral_lead=2 * math.tanh(7))
    assert acceleration(view, P) == pytest.approx(ACC_69, rel=1e-13)


@given(v=st.floats(0, 4), h=st.floats(0.5, 20), vl=st.floats(0, 4), hl=st.floats(0, 20), vll=st.floats(0, 4))
def test_reduction_to_single_lane(v, h, vl, hl, vll):
    params = make_params(alpha=2.0, p=1.0, q=0.0, lambda1=0.3, lambda2=0.0)
    single = params.alpha * (params.p * optimal_velocity(h, params) - v) + params.lambda1 * (vl - v)
    assert acceleration(NeighborView(v, h, vl, hl, vll), params) == single


@given(delta=st.floats(-30, 30))
def test_oddness_about_h_c(delta):
    lhs = optimal_velocity(P.h_c + delta, P) + optimal_velocity(P.h_c - delta, P)
    assert lhs == pytest.approx(2 * optimal_velocity(P.h_c, P), abs=1e-12)


def test_monotone():
    h = np.linspace(-10, 30, 4001)
    assert np.all(ov_derivative(h, 1, P) > 0)
    assert np.all(np.diff(optimal_velocity(np.linspace(0, 14, 1401), P)) > 0)


def test_derivative_at_critical_point():
    assert ov_derivative(7.0, 1, P) == 2.0
    assert ov_derivative(7.0, 2, P) == 0.0
    assert ov_derivative(7.0, 3, P) == -4.0


def test_third_derivative_direct_stencil():
    # independent of the lower-order closed forms: third-difference stencil on V itself;
    # float64 round-off in the stencil grows like eps/h^3, so h = 1e-2 here
    def d3(h):
        return (optimal_velocity(7 + 2 * h, P) - 2 * optimal_velocity(7 + h, P)
                + 2 * optimal_velocity(7 - h, P) - optimal_velocity(7 - 2 * h, P)) / (2 * h**3)
    fd = (4 * d3(5e-3) - d3(1e-2)) / 3
    assert fd == pytest.approx(-4.0, abs=1e-6)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_derivatives_vs_finite_differences(order):
    h = np.random.default_rng(order).uniform(0, 20, 100)
    below = (lambda x: optimal_velocity(x, P)) if order == 1 else (lambda x: ov_derivative(x, order - 1, P))
    assert np.max(np.abs(ov_derivative(h, order, P) - richardson_diff(below, h))) < 1e-6


def test_bad_derivative_order():
    with pytest.raises(ValueError):
        ov_derivative(7.0, 4, P)


def test_corrupted_derivative_is_caught():
    def swapped(h, order, params):
        return ov_derivative(h, {1: 1, 2: 3, 3: 2}[order], params)
    assert check_derivatives(P).passed
    assert not check_derivatives(P, derivative=swapped).passed


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(alpha=0.0)
    with pytest.raises(ValueError, match="l_v"):
        ModelParams(alpha=1.0, l_v=12.0, d=10.0)
    with pytest.raises(ValueError):
        ModelParams(alpha=1.0, q=-0.1)
    with pytest.warns(UserWarning, match="p \\+ q"):
        ModelParams(alpha=1.0, p=0.5, q=0.2)


def test_negative_headway_allowed():
    view = NeighborView(1.0, -0.5, 1.0, 7.0, 1.0)
    assert not view.valid
    assert math.isfinite(acceleration(view, P))


@settings(max_examples=50)
@given(h=st.floats(-50, 50))
def test_bounds(h):
    lo = P.v_max / 2 * (math.tanh(P.h_c) - 1)
    hi = P.v_max / 2 * (1 + math.tanh(P.h_c))
    assert lo - 1e-12 <= optimal_velocity(h, P) <= hi + 1e-12
