import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustpa.dynamics_state import (
    DynamicPrimitives,
    RobustnessState,
    bayes_update,
    binary_capacity,
    capacity_bounds,
    incentive_capacity,
    incentive_gap,
    lambda_star,
    llr_update,
    post_innovation_state,
    trap_check,
)
from robustpa.errors import DomainError

from oracles import binary_capacity_grid, binary_gap

BASE = DynamicPrimitives(p=0.5, theta_L=0.2, theta_H=0.8, m=0.5, k=1.0, gamma=1.0)
TRAP = DynamicPrimitives(p=0.5, theta_L=0.01, theta_H=0.8, m=0.5, k=1.0, gamma=0.1)
LOG25 = math.log(2.5)


@st.composite
def primitives(draw):
    p = draw(st.floats(0.2, 0.8))
    th_l = draw(st.floats(0.02, p - 0.05))
    th_h = draw(st.floats(p + 0.05, 0.98))
    return DynamicPrimitives(p=p, theta_L=th_l, theta_H=th_h, m=draw(st.floats(0.05, 0.95)), k=draw(st.floats(0.05, 2.0)), gamma=draw(st.floats(0.05, 5.0)))


# --- updates --------------------------------------------------------------------------------------


@pytest.mark.parametrize("y,expected", [(1, 0.8), (0, 0.2)])
def test_bayes_reference_values(y, expected):
    assert bayes_update(BASE, 0.5, y) == pytest.approx(expected, abs=1e-15)


@given(st.floats(0.01, 0.99), st.sampled_from([0, 1]))
def test_bayes_uninformative_likelihood(m, y):
    # theta_L = theta_H is excluded by the primitives, so evaluate the formula at a near-tie
    prims = BASE.replace(theta_L=0.5 - 1e-12, theta_H=0.5 + 1e-12, p=0.5)
    assert bayes_update(prims, m, y) == pytest.approx(m, abs=1e-10)


@given(primitives(), st.floats(0.01, 0.99))
def test_bayes_direction(prims, m):
    assert bayes_update(prims, m, 1) > m > bayes_update(prims, m, 0)


@pytest.mark.parametrize("m", [0.0, 1.0, -0.1])
def test_bayes_rejects_degenerate_priors(m):
    with pytest.raises(DomainError):
        bayes_update(BASE, m, 1)


@pytest.mark.parametrize("gamma,y,expected", [(1.0, 1, 0.223144), (0.1, 1, 2.231436), (1.0, 0, -math.log(0.8))])
def test_llr_reference_values(gamma, y, expected):
    assert llr_update(BASE.replace(gamma=gamma), y) == pytest.approx(expected, abs=1e-6)


def test_llr_after_failure_vanishes_as_theta_L_vanishes():
    values = [llr_update(BASE.replace(theta_L=t), 0) for t in (1e-2, 1e-4, 1e-8)]
    assert values[-1] < 1e-7
    assert values == sorted(values, reverse=True)


def test_post_innovation_state_composes_updates():
    s = post_innovation_state(TRAP, 1)
    assert s.m == bayes_update(TRAP, 0.5, 1)
    assert s.lam == llr_update(TRAP, 1)


# --- incentive gap --------------------------------------------------------------------------------


@given(primitives(), st.floats(0.0, 1.0), st.floats(0.05, 3.0), st.floats(-5, 5))
def test_gap_vanishes_on_constant_contracts(prims, m, lam, c):
    assert incentive_gap(RobustnessState(m, lam), prims, [c, c]) == pytest.approx(0.0, abs=1e-12)


@given(primitives(), st.floats(0.0, 1.0), st.floats(0.05, 3.0), st.floats(-5, 5), st.floats(-5, 5), st.floats(-10, 10))
def test_gap_translation_invariant_and_matches_oracle(prims, m, lam, a, b, z):
    state = RobustnessState(m, lam)
    gap = incentive_gap(state, prims, [a, b])
    assert incentive_gap(state, prims, [a + z, b + z]) == pytest.approx(gap, abs=1e-11)
    assert gap == pytest.approx(float(binary_gap(prims.p, prims.thetas, state.weights, b - a, lam)), abs=1e-11)


@given(primitives(), st.floats(0.0, 1.0), st.floats(-5, 5), st.floats(-5, 5))
def test_gap_at_expected_utility_endpoint(prims, m, a, b):
    qbar = (1 - m) * prims.theta_L + m * prims.theta_H
    assert incentive_gap(RobustnessState(m, 0.0), prims, [a, b]) == pytest.approx((qbar - prims.p) * (b - a), abs=1e-12)


def test_gap_boundary_limit():
    # index 0 is failure: a large positive spread approaches log((1-p)/(1-theta))
    gap = incentive_gap(RobustnessState(1.0, 1.0), BASE, [-50.0, 0.0])
    assert gap == pytest.approx(LOG25, abs=1e-12)


# --- capacity -------------------------------------------------------------------------------------


@pytest.mark.parametrize("theta", [0.8, 0.2])
def test_point_mass_capacity(theta):
    cap = binary_capacity([theta], [1.0], 0.5, 1.0)
    assert cap.value == pytest.approx(LOG25, abs=1e-12)
    assert not cap.attained and cap.argmax_spread is None
    assert cap.value == pytest.approx(binary_capacity_grid(0.5, [theta], [1.0], 1.0), abs=1e-9)


def test_mixture_capacity_lower_bound_example():
    cap = binary_capacity([0.2, 0.8], [0.5, 0.5], 0.5, 1.0)
    assert cap.value >= 0.5 * math.log(0.5 / 0.8) + 0.5 * math.log(0.5 / 0.2) - 1e-12
    assert cap.value >= 0.2231


@pytest.mark.parametrize("thetas,weights,p,expected", [([0.3, 0.7], [0.5, 0.5], 0.5, 0.0), ([0.4], [1.0], 0.5, math.inf), ([0.6], [1.0], 0.5, math.inf)])
def test_expected_utility_capacity(thetas, weights, p, expected):
    assert binary_capacity(thetas, weights, p, 0.0).value == expected


def test_demanding_endpoint_capacity_is_zero():
    assert binary_capacity([0.2, 0.8], [0.5, 0.5], 0.5, math.inf).value == 0.0


def test_attained_interior_maximum_is_flagged():
    # both models above p with moderate spread: interior maximum exceeds both limits
    cap = binary_capacity([0.55, 0.95], [0.5, 0.5], 0.5, 1.0)
    if cap.attained:
        assert cap.argmax_spread is not None
        assert cap.interior > max(cap.limit_plus, cap.limit_minus)
    assert cap.value == pytest.approx(binary_capacity_grid(0.5, [0.55, 0.95], [0.5, 0.5], 1.0), abs=1e-7)


@settings(max_examples=60)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.2, 3.0))
def test_capacity_matches_grid_and_bounds(p, t1, t2, w, lam):
    thetas, weights = [t1, t2], [1 - w, w]
    cap = binary_capacity(thetas, weights, p, lam)
    assert cap.value == pytest.approx(binary_capacity_grid(p, thetas, weights, lam), abs=1e-6)
    lo, hi = capacity_bounds(thetas, weights, p, lam)
    assert lo - 1e-12 <= cap.value <= hi + 1e-9


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.1, 5.0))
def test_point_mass_capacity_scales_inversely(theta, p, lam):
    if abs(theta - p) < 1e-3:
        return
    a, b = binary_capacity([theta], [1.0], p, 1.0).value, binary_capacity([theta], [1.0], p, lam).value
    assert b == pytest.approx(a / lam, rel=1e-12)


def test_incentive_capacity_delegates():
    state = RobustnessState(0.3, 0.7)
    assert incentive_capacity(state, BASE).value == binary_capacity(BASE.thetas, state.weights, BASE.p, 0.7).value


# --- trap -----------------------------------------------------------------------------------------


def test_lambda_star_reference_value():
    assert lambda_star(BASE) == pytest.approx(0.916291, abs=1e-6)


def test_trap_instance():
    rep = trap_check(TRAP)
    assert rep.trap is True
    assert rep.lambda_star == pytest.approx(0.916291, abs=1e-6)
    assert rep.lambda2_success == pytest.approx(2.231436, abs=1e-6)
    assert rep.closed_form and rep.forms_agree
    # at this cost the trap persists on all of (0, p), so the certificate is p itself
    assert rep.theta_L_bar == TRAP.p
    assert all(trap_check(TRAP.replace(theta_L=t)).trap for t in (0.05, 0.2, 0.45))


def test_trap_blocks_every_tested_contract():
    state = post_innovation_state(TRAP, 1)
    rng = np.random.default_rng(0)
    xs = rng.normal(scale=10.0, size=(1000, 2))
    assert max(incentive_gap(state, TRAP, x) for x in xs) < TRAP.k


@pytest.mark.parametrize("theta_L", [0.01, 0.1, 0.3, 0.45])
def test_fast_learner_never_trapped(theta_L):
    prims = TRAP.replace(gamma=10.0, theta_L=theta_L)
    rep = trap_check(prims)
    assert rep.lambda2_success < rep.lambda_star
    assert rep.trap is False and rep.theta_L_bar is None


def test_post_failure_capacity_grows_as_theta_L_shrinks():
    caps = [incentive_capacity(post_innovation_state(TRAP.replace(gamma=10.0, theta_L=t), 0), TRAP).value for t in (1e-2, 1e-4, 1e-8)]
    assert caps[0] < caps[1] < caps[2]
    assert caps[-1] > 100


@given(primitives())
def test_expected_utility_benchmark_has_no_trap(prims):
    rep = trap_check(prims.replace(gamma=math.inf))
    assert rep.trap is False
    assert rep.capacity.value == math.inf


def test_knife_edge_reports_boundary():
    # gamma solving lambda2(1) = lambda*
    gamma = math.log(1 / 0.8) / math.log(2.5)
    rep = trap_check(TRAP.replace(gamma=gamma))
    assert rep.verdict == "boundary" and rep.trap is None


@given(primitives())
def test_closed_form_agrees(prims):
    assert trap_check(prims).forms_agree


@pytest.mark.parametrize(
    "kw",
    [dict(theta_L=0.6), dict(theta_H=0.4), dict(m=0.0), dict(k=0.0), dict(gamma=0.0), dict(A=0.5), dict(delta=0.0), dict(delta=1.5)],
)
def test_invalid_primitives_rejected(kw):
    with pytest.raises(DomainError):
        BASE.replace(**kw)
