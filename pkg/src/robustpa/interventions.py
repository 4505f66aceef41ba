"""Remedies for post-success traps: coarse feedback, screening at hiring, and turnover.

Coarse feedback reports every success as favorable and each failure as favorable
with probability r. The agent then learns from the signal instead of the outcome,
which dampens both the posterior move and the LLR intensity after a favorable
report.

Screening offers two tracks: E, under which the agent plays safe at date 1, and I,
under which the agent innovates. The value difference D(gamma) = V1^I - V1^E is
strictly increasing in the LLR scale gamma, so the tracks separate agents at a cutoff.

Turnover replaces the agent after an early success. The new agent inherits the
posterior but not the evidence, so it evaluates continued innovation at the
date-1 intensity lambda1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from robustpa.dynamic_contract import (
    INNOVATE,
    SAFE,
    ActionPlan,
    DynamicContract,
    _FirstPeriod,
    _first_period_candidates,
    _make_node,
    _Node,
    _split,
    best_plan,
    binding_spreads,
    first_period_values,
    second_period_states,
)
from robustpa.dynamics_state import (
    DynamicPrimitives,
    RobustnessState,
    incentive_capacity,
    lambda_star,
    post_innovation_state,
)
from robustpa.entropic import certainty_equivalent
from robustpa.errors import DomainError, InfeasibleError, PreconditionError

CUTOFF_XTOL = 1e-8


# --- coarse feedback -----------------------------------------------------------------------------


def _check_rate(r: float) -> float:
    r = float(r)
    if not 0.0 <= r <= 1.0:
        raise DomainError(f"false-positive rate must lie in [0, 1], got {r}")
    return r


def favorable_likelihood(theta: float, r: float) -> float:
    """Probability of a favorable report when the success probability is ``theta``."""
    return r + (1.0 - r) * theta


def feedback_state(prims: DynamicPrimitives, r: float) -> RobustnessState:
    """State after innovating at date 1 and receiving a favorable report under rate ``r``."""
    r = _check_rate(r)
    lik_h = favorable_likelihood(prims.theta_H, r)
    lik_l = favorable_likelihood(prims.theta_L, r)
    m = prims.m * lik_h / (prims.m * lik_h + (1 - prims.m) * lik_l)
    # with r = 1 the report is certain, so nothing is unexplained
    lam = -math.log(lik_h) / prims.gamma if lik_h < 1.0 else 0.0
    return RobustnessState(m, lam)


def optimal_coarsening(prims: DynamicPrimitives) -> float:
    """Smallest false-positive rate that keeps the post-report intensity at or below lambda*."""
    target = math.exp(-prims.gamma * lambda_star(prims))
    return max(0.0, (target - prims.theta_H) / (1.0 - prims.theta_H))


def feedback_capacity(prims: DynamicPrimitives, r: float):
    """Incentive capacity in the state after a favorable report."""
    return incentive_capacity(feedback_state(prims, r), prims)


# --- screening -----------------------------------------------------------------------------------


@dataclass(frozen=True)
class HiringMenu:
    E: DynamicContract
    I: DynamicContract

    def __post_init__(self) -> None:
        if self.I.x2[1, 0] == self.I.x2[1, 1]:
            raise PreconditionError("track I must pay a success-contingent continuation: x2(1,0) == x2(1,1)")


def track_values(prims: DynamicPrimitives, menu: HiringMenu, gamma: float) -> tuple[float, float]:
    """(V1^E, V1^I) at LLR scale ``gamma`` after checking each track induces its date-1 action."""
    if not gamma > 0.0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    pr = prims.replace(gamma=gamma)
    safe_e, innov_e = first_period_values(pr, menu.E)
    safe_i, innov_i = first_period_values(pr, menu.I)
    if innov_e >= safe_e:
        raise PreconditionError(f"track E does not induce the safe action at gamma={gamma}")
    if innov_i < safe_i:
        raise PreconditionError(f"track I does not induce innovation at gamma={gamma}")
    return safe_e, innov_i


def screening_diff(prims: DynamicPrimitives, menu: HiringMenu, gamma: float) -> float:
    """D(gamma) = V1^I - V1^E."""
    v_e, v_i = track_values(prims, menu, gamma)
    return v_i - v_e


def screening_cutoff(prims: DynamicPrimitives, menu: HiringMenu, gamma_lo: float, gamma_hi: float) -> float:
    """The gamma at which an agent is indifferent between the tracks, by bisection."""
    if not 0.0 < gamma_lo < gamma_hi:
        raise DomainError(f"need 0 < gamma_lo < gamma_hi, got [{gamma_lo}, {gamma_hi}]")
    d_lo = screening_diff(prims, menu, gamma_lo)
    d_hi = screening_diff(prims, menu, gamma_hi)
    if not (d_lo < 0.0 < d_hi):
        raise DomainError(f"bracket does not straddle the cutoff: D(lo)={d_lo:.3e}, D(hi)={d_hi:.3e}")
    return float(optimize.bisect(lambda g: screening_diff(prims, menu, g), gamma_lo, gamma_hi, xtol=CUTOFF_XTOL))


# --- turnover ------------------------------------------------------------------------------------


@dataclass
class TurnoverReport:
    capacity_incumbent: float
    capacity_fresh: float
    sandwich: bool
    slope: float | None
    intercept: float | None
    keep_profit: float
    A_bar: float | None
    verdict: str
    contract: DynamicContract | None = None
    new_agent_x2: np.ndarray | None = None

    def turnover_profit(self, A: float) -> float:
        """Net turnover profit, affine in the scale-up multiplier."""
        if self.slope is None or self.intercept is None:
            raise DomainError("no turnover contract was constructed")
        return self.intercept + (A - 1.0) * self.slope


def _replacement_node(prims: DynamicPrimitives, state: RobustnessState) -> tuple[np.ndarray, float, float]:
    """Cheapest new-agent continuation at ``state``: binding spread, value U0. Returns (x, wage, q2)."""
    q2 = float(state.weights @ prims.thetas)
    best = None
    for zeta in binding_spreads(prims, state):
        shape = np.array([0.0, zeta])
        level = prims.U0 + prims.k - float(state.weights @ [_ce(th, shape, state.lam) for th in prims.thetas])
        x = shape + level
        wage = (1 - q2) * float(prims.wage_map.h(x[0])) + q2 * float(prims.wage_map.h(x[1]))
        if best is None or wage < best[1]:
            best = (x, wage)
    return best[0], best[1], q2


def _ce(theta: float, x: np.ndarray, lam: float) -> float:
    return certainty_equivalent([1 - theta, theta], x, lam)


def _turnover_plan(prims: DynamicPrimitives, s0: int, new_wage: float, q2_new: float, phi: float):
    """Incumbent innovates at date 1, receives a constant continuation after success, and is replaced."""
    plan = ActionPlan(INNOVATE, (s0, SAFE))
    on = second_period_states(prims, INNOVATE)
    off = second_period_states(prims, SAFE)
    zeta0 = binding_spreads(prims, on[0]) if s0 == INNOVATE else [0.0]
    severance = _Node(np.zeros(2), 0.0, 0.0, 0.5)
    best = None
    for z0 in zeta0:
        node0 = _make_node(prims, plan, 0, z0, on[0], off[0])
        fp = _FirstPeriod(prims, plan, (node0, severance))
        for zs in _first_period_candidates(fp):
            c = float(fp.cost(np.array([zs]))[0])
            if best is None or c < best[0]:
                best = (c, zs, fp)
    if best is None:
        return None
    cost, zs, fp = best
    q1 = fp.q1
    q2_0 = fp.nodes[0].q2
    # intercept is the A = 1 profit
    intercept = q1 + (1 - q1) * q2_0 + q1 * q2_new - cost - q1 * (new_wage + phi)
    za, zb = fp.z(np.array([zs]))
    x1 = np.empty(2)
    x2 = np.empty((2, 2))
    for y1, zz in ((0, za), (1, zb)):
        node = fp.nodes[y1]
        xa, v, _ = _split(prims, node, np.atleast_1d(zz))
        x1[y1] = xa[0]
        x2[y1] = node.shape + (v[0] - node.on_value)
    return intercept, DynamicContract(x1, x2)


def turnover_analysis(prims: DynamicPrimitives, phi: float) -> TurnoverReport:
    """Compare replacing the agent after early success against the best keep-incumbent plan.

    The sandwich C(posterior, lambda2(1)) < k < C(posterior, lambda1) says the
    incumbent cannot be motivated to keep innovating after success while a fresh
    agent can. When it holds, turnover profit is affine in A with slope
    P(y1 = 1) * E[q(1) | success], and it beats keeping the incumbent for A > A_bar.
    """
    if not phi >= 0.0:
        raise DomainError(f"replacement cost must be nonnegative, got {phi}")
    post = post_innovation_state(prims, 1)
    fresh = RobustnessState(post.m, prims.lambda1)
    cap_inc = incentive_capacity(post, prims).value
    cap_new = incentive_capacity(fresh, prims)
    keep = best_plan(prims).profit
    sandwich = cap_inc < prims.k and (cap_new.value > prims.k or (cap_new.value == prims.k and cap_new.attained))
    if not sandwich:
        return TurnoverReport(cap_inc, cap_new.value, False, None, None, keep, None, "no gain")

    x_new, new_wage, q2_new = _replacement_node(prims, fresh)
    best = None
    for s0 in (SAFE, INNOVATE):
        try:
            out = _turnover_plan(prims, s0, new_wage, q2_new, phi)
        except InfeasibleError:
            continue
        if out is not None and (best is None or out[0] > best[0]):
            best = out
    if best is None:
        return TurnoverReport(cap_inc, cap_new.value, True, None, None, keep, None, "no gain")
    intercept, contract = best
    q1 = prims.m * prims.theta_H + (1 - prims.m) * prims.theta_L
    slope = q1 * q2_new
    a_bar = 1.0 + (keep - intercept) / slope
    return TurnoverReport(
        capacity_incumbent=cap_inc,
        capacity_fresh=cap_new.value,
        sandwich=True,
        slope=slope,
        intercept=intercept,
        keep_profit=keep,
        A_bar=a_bar,
        verdict="turnover beats keeping the incumbent for A > A_bar",
        contract=contract,
        new_agent_x2=x_new,
    )
