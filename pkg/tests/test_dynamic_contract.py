import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustpa import dynamic_contract as dc
from robustpa.dynamics_state import DynamicPrimitives, RobustnessState
from robustpa.entropic import certainty_equivalent
from robustpa.errors import DomainError, InfeasibleError
from robustpa.wagemap import WageMap

from oracles import joint_continuation_value

BASE = DynamicPrimitives(p=0.5, theta_L=0.2, theta_H=0.8, m=0.5, k=0.1, gamma=1.0, lambda1=0.1)
TRAP = DynamicPrimitives(p=0.5, theta_L=0.01, theta_H=0.8, m=0.5, k=1.0, gamma=0.1)
ALL_SAFE = dc.ActionPlan(dc.SAFE, (dc.SAFE, dc.SAFE))
H = WageMap().h

contracts = st.tuples(
    st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.lists(st.floats(-3, 3), min_size=4, max_size=4)
).map(lambda t: dc.DynamicContract(np.array(t[0]), np.array(t[1]).reshape(2, 2)))


# --- continuation values --------------------------------------------------------------------------


@pytest.mark.parametrize("xi", [-1.0, 0.0, 2.5])
def test_constant_node_stays_safe(xi):
    assert dc.continuation_value(BASE, RobustnessState(0.5, 1.0), [xi, xi]) == (xi, dc.SAFE)


def test_indifference_goes_to_innovation():
    # expected-utility state with dyadic numbers: innovation and safe values are both exactly 1
    prims = DynamicPrimitives(p=0.5, theta_L=0.375, theta_H=0.875, m=0.5, k=0.25, gamma=1.0)
    value, action = dc.continuation_value(prims, RobustnessState(0.5, 0.0), [0.0, 2.0])
    assert value == 1.0 and action == dc.INNOVATE


@pytest.mark.parametrize(
    "m,lam,x",
    [(0.5, 1.0, [0.0, 1.0]), (0.3, 0.5, [1.0, -2.0]), (0.8, 2.0, [-0.5, 3.0]), (0.5, 0.7, [0.2, 0.2])],
)
def test_reduced_value_matches_joint_minimization(m, lam, x):
    state = RobustnessState(m, lam)
    reduced, _ = dc.continuation_value(BASE, state, x)
    Q = [[0.8, 0.2], [0.2, 0.8]]
    assert reduced == pytest.approx(joint_continuation_value(BASE.safe_model, Q, state.weights, x, lam, BASE.k), abs=1e-3)


@pytest.mark.parametrize("x", [[0.0], [0.0, math.nan]])
def test_bad_node_profile_rejected(x):
    with pytest.raises(DomainError):
        dc.continuation_value(BASE, RobustnessState(0.5, 1.0), x)


# --- first-period gap -----------------------------------------------------------------------------


@pytest.mark.parametrize("c", [-1.0, 0.0, 0.8])
def test_constant_contract_gap_is_minus_k(c):
    contract = dc.DynamicContract(np.full(2, c), np.full((2, 2), c))
    assert dc.first_period_gap(BASE, contract) == pytest.approx(-BASE.k, abs=1e-12)


@settings(max_examples=50)
@given(contracts, st.floats(-5, 5))
def test_first_period_gap_translation_invariant(contract, zeta):
    assert dc.first_period_gap(BASE, contract.shifted(zeta)) == pytest.approx(dc.first_period_gap(BASE, contract), abs=1e-10)


def test_large_success_spreads_induce_early_innovation():
    contract = dc.DynamicContract(np.array([0.0, 3.0]), np.array([[0.0, 0.0], [0.0, 3.0]]))
    assert dc.first_period_gap(BASE, contract) > 0


# --- plans ----------------------------------------------------------------------------------------


def test_plan_validation():
    with pytest.raises(DomainError):
        dc.ActionPlan(3, (1, 1))
    with pytest.raises(DomainError):
        dc.ActionPlan(1, (1,))
    with pytest.raises(DomainError):
        dc.DynamicContract(np.zeros(2), np.zeros(2))


def test_all_safe_plan_is_full_insurance():
    sol = dc.solve_plan(BASE, ALL_SAFE)
    # with delta = 1 and U0 = 0 the cheapest split pays zero utility at both dates
    np.testing.assert_allclose(sol.contract.x1, 0.0, atol=1e-8)
    np.testing.assert_allclose(sol.contract.x2, 0.0, atol=1e-8)
    assert sol.profit == pytest.approx(2 * BASE.p - 2 * float(H(0.0)), abs=1e-8)


def test_trap_blocks_success_node_innovation():
    with pytest.raises(InfeasibleError) as info:
        dc.solve_plan(TRAP, dc.ActionPlan(dc.INNOVATE, (dc.SAFE, dc.INNOVATE)))
    assert info.value.certificate["node"] == 1


@pytest.fixture(scope="module")
def base_solutions():
    return dc.enumerate_plans(BASE)


def test_every_plan_is_attempted(base_solutions):
    assert [plan for plan, _ in base_solutions] == list(dc.ALL_PLANS)
    assert isinstance(base_solutions[0][1], dc.PlanSolution)


def test_solved_plans_bind(base_solutions):
    solved = [sol for _, sol in base_solutions if isinstance(sol, dc.PlanSolution)]
    assert len(solved) >= 4
    for sol in solved:
        assert abs(sol.v1 - BASE.U0) <= 1e-6
        for rep in sol.node_reports:
            assert rep.action == sol.plan.sigma2[rep.y1]
            if sol.plan.sigma2[rep.y1] == dc.INNOVATE:
                assert abs(rep.gap - BASE.k) <= 1e-6
            else:
                np.testing.assert_allclose(sol.contract.x2[rep.y1], sol.contract.x2[rep.y1, 0], atol=1e-12)
        gap = sol.first_period_gap
        assert gap >= -dc.WEAK_TOL if sol.plan.a1 == dc.INNOVATE else gap <= dc.WEAK_TOL


def test_best_plan_is_the_most_profitable(base_solutions):
    best = dc.best_plan(BASE, base_solutions)
    assert best.profit == max(sol.profit for _, sol in base_solutions if isinstance(sol, dc.PlanSolution))


def test_huge_cost_leaves_only_safe_plans():
    best = dc.best_plan(BASE.replace(k=50.0))
    assert best.plan == ALL_SAFE


def test_trap_profits_ignore_scale_up():
    a, b = dc.enumerate_plans(TRAP.replace(A=2.0)), dc.enumerate_plans(TRAP.replace(A=10.0))
    for (plan, s2), (_, s10) in zip(a, b):
        assert isinstance(s2, dc.PlanSolution) == isinstance(s10, dc.PlanSolution)
        if isinstance(s2, dc.PlanSolution):
            assert abs(s2.profit - s10.profit) <= 1e-8
        if plan.a1 == dc.INNOVATE and plan.sigma2[1] == dc.INNOVATE:
            assert not isinstance(s2, dc.PlanSolution)


def test_expected_utility_benchmark_rewards_scale_up():
    eu = TRAP.replace(gamma=math.inf, lambda1=0.0, A=100.0)
    best = dc.best_plan(eu)
    assert best.plan.sigma2[1] == dc.INNOVATE
    assert best.plan.a1 == dc.INNOVATE


# --- profit accounting ----------------------------------------------------------------------------


@given(contracts, st.floats(1.0, 20.0))
def test_all_safe_profit_ignores_scale_up(contract, A):
    assert dc.profit(BASE.replace(A=A), ALL_SAFE, contract) == pytest.approx(dc.profit(BASE, ALL_SAFE, contract), abs=1e-12)


@given(contracts, st.floats(1.0, 20.0))
def test_scale_up_term(contract, A):
    plan = dc.ActionPlan(dc.INNOVATE, (dc.SAFE, dc.INNOVATE))
    q1 = BASE.m * BASE.theta_H + (1 - BASE.m) * BASE.theta_L
    m_post = BASE.m * BASE.theta_H / q1
    q2 = m_post * BASE.theta_H + (1 - m_post) * BASE.theta_L
    diff = dc.profit(BASE.replace(A=A), plan, contract) - dc.profit(BASE, plan, contract)
    assert diff == pytest.approx((A - 1) * q1 * q2, abs=1e-12)


def test_zero_contract_profit():
    contract = dc.DynamicContract(np.zeros(2), np.zeros((2, 2)))
    assert dc.profit(BASE, ALL_SAFE, contract) == pytest.approx(2 * BASE.p - 2.0, abs=1e-15)
    assert dc.wage_bill(BASE, ALL_SAFE, contract) == pytest.approx(2.0, abs=1e-15)


@given(st.floats(-2, 2), st.floats(0.01, 3), st.floats(0.1, 3))
def test_safe_node_insurance(c, spread, lam):
    # a non-constant node with the same safe certainty equivalent costs weakly more
    q = BASE.safe_model
    base = np.array([0.0, spread])
    x = base + c - certainty_equivalent(q, base, lam)
    assert q @ H(x) >= float(H(c)) - 1e-12
