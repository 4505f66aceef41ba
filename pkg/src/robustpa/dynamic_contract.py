"""Two-period contracts on binary outcomes: continuation values, plans and their optimal contracts.

Actions are encoded as integers: ``SAFE = 1`` and ``INNOVATE = 2``. A plan is the
first-period action together with the second-period action after each first
outcome. Second-period states depend on the first action: after the safe action
the state stays at (m, lambda1); after innovation it moves to the Bayes posterior
and the LLR intensity of :mod:`robustpa.dynamics_state`.

The first-period comparison uses, for each first action, the continuation values
the agent would obtain in the states that action leads to. When both actions lead
to the same continuation values this is the usual incentive gap of
``x1 + delta * V2`` at (m, lambda1).

Solving a plan fixes the continuation shape at every node (constant at safe nodes,
a binding spread at innovation nodes), which leaves one free level per node. The
first-period payment and the node level at each y1 enter the agent's problem only
through z(y1) = x1(y1) + delta * v(y1); for a given z the principal splits the
utility between the two dates at least cost, a one-dimensional convex problem.
What remains is a search over the spread of z, with the level of z fixed by binding
participation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from robustpa._search import golden_max, sign_change_roots
from robustpa.dynamics_state import (
    DynamicPrimitives,
    RobustnessState,
    incentive_capacity,
    post_innovation_state,
)
from robustpa.entropic import classify_intensity
from robustpa.errors import DomainError, InfeasibleError

SAFE = 1
INNOVATE = 2

NODE_SCAN_HALF_WIDTH = 200.0
NODE_SCAN_POINTS = 8001
FIRST_PERIOD_SCAN_POINTS = 4001
FIRST_PERIOD_SINH_RANGE = math.asinh(1e4)
SPLIT_BISECTIONS = 200
SOLVE_TOL = 1e-6
# a prescribed action counts as chosen when it is optimal up to this slack
WEAK_TOL = 1e-9


@dataclass(frozen=True)
class ActionPlan:
    """First action ``a1`` and second-period actions ``sigma2[y1]``."""

    a1: int
    sigma2: tuple[int, int]

    def __post_init__(self) -> None:
        sig = tuple(int(a) for a in self.sigma2)
        if self.a1 not in (SAFE, INNOVATE) or len(sig) != 2 or any(a not in (SAFE, INNOVATE) for a in sig):
            raise DomainError(f"plan actions must be 1 or 2 with sigma2 on both outcomes, got {self.a1}, {self.sigma2}")
        object.__setattr__(self, "sigma2", sig)

    @property
    def label(self) -> str:
        return f"a1={self.a1},s2(0)={self.sigma2[0]},s2(1)={self.sigma2[1]}"


ALL_PLANS: tuple[ActionPlan, ...] = tuple(
    ActionPlan(a1, (s0, s1)) for a1, s0, s1 in itertools.product((SAFE, INNOVATE), repeat=3)
)


@dataclass(frozen=True)
class DynamicContract:
    """Utility payments: ``x1[y1]`` at date 1 and ``x2[y1, y2]`` at date 2."""

    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self) -> None:
        x1 = np.asarray(self.x1, dtype=float)
        x2 = np.asarray(self.x2, dtype=float)
        if x1.shape != (2,) or x2.shape != (2, 2):
            raise DomainError(f"expected x1 of shape (2,) and x2 of shape (2, 2), got {x1.shape} and {x2.shape}")
        if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
            raise DomainError("contract utilities must be finite")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)

    def shifted(self, c: float) -> "DynamicContract":
        return DynamicContract(self.x1 + c, self.x2 + c)


@dataclass
class NodeReport:
    y1: int
    state: RobustnessState
    action: int
    spread: float
    gap: float
    capacity: float | None = None


@dataclass
class PlanSolution:
    plan: ActionPlan
    contract: DynamicContract
    profit: float
    v1: float
    wage_bill: float
    first_period_gap: float
    node_reports: list[NodeReport] = field(default_factory=list)
    trace: dict = field(default_factory=dict)


# --- binary certainty equivalents on the normalized profile (0, zeta) ---------------------------


def _ce_binary(theta: float, zeta: np.ndarray, lam: float) -> np.ndarray:
    """g_q((0, zeta); lam) for q = Bernoulli(theta), vectorized in zeta."""
    zeta = np.asarray(zeta, dtype=float)
    kind = classify_intensity(lam)
    if kind == "zero":
        return theta * zeta
    if kind == "inf":
        return np.minimum(zeta, 0.0)
    return -np.logaddexp(math.log1p(-theta), math.log(theta) - lam * zeta) / lam


def _arc_binary(thetas: np.ndarray, weights: np.ndarray, zeta: np.ndarray, lam: float) -> np.ndarray:
    return sum(w * _ce_binary(t, zeta, lam) for t, w in zip(thetas, weights) if w > 0.0)


def _node_values(prims: DynamicPrimitives, state: RobustnessState, x: Sequence[float]) -> tuple[float, float]:
    """(safe value, innovative value net of k) of the node profile ``x``."""
    x = np.asarray(x, dtype=float)
    zeta = np.array([x[1] - x[0]])
    safe = x[0] + float(_ce_binary(prims.p, zeta, state.lam)[0])
    innov = x[0] + float(_arc_binary(prims.thetas, state.weights, zeta, state.lam)[0]) - prims.k
    return safe, innov


def continuation_value(prims: DynamicPrimitives, state: RobustnessState, x_node: Sequence[float]) -> tuple[float, int]:
    """Best second-period value at a node and the action attaining it; ties go to innovation."""
    x = np.asarray(x_node, dtype=float)
    if x.shape != (2,) or not np.all(np.isfinite(x)):
        raise DomainError("a node profile is a finite pair (x(0), x(1))")
    safe, innov = _node_values(prims, state, x)
    if innov >= safe:
        return innov, INNOVATE
    return safe, SAFE


def second_period_states(prims: DynamicPrimitives, a1: int) -> tuple[RobustnessState, RobustnessState]:
    """States at y1 = 0 and y1 = 1 that first action ``a1`` leads to."""
    if a1 == SAFE:
        s = RobustnessState(prims.m, prims.lambda1)
        return s, s
    return post_innovation_state(prims, 0), post_innovation_state(prims, 1)


def _continuations(prims: DynamicPrimitives, contract: DynamicContract, a1: int) -> np.ndarray:
    states = second_period_states(prims, a1)
    return np.array([continuation_value(prims, states[y], contract.x2[y])[0] for y in (0, 1)])


def first_period_values(prims: DynamicPrimitives, contract: DynamicContract) -> tuple[float, float]:
    """Date-1 values (safe, innovative net of k) at (m, lambda1), each with its own continuation states."""
    s1 = RobustnessState(prims.m, prims.lambda1)
    z_safe = contract.x1 + prims.delta * _continuations(prims, contract, SAFE)
    z_innov = contract.x1 + prims.delta * _continuations(prims, contract, INNOVATE)
    return _node_values(prims, s1, z_safe)[0], _node_values(prims, s1, z_innov)[1]


def first_period_gap(prims: DynamicPrimitives, contract: DynamicContract) -> float:
    """Date-1 innovative value minus safe value; nonnegative iff early innovation is optimal."""
    safe, innov = first_period_values(prims, contract)
    return innov - safe


def agent_value(prims: DynamicPrimitives, contract: DynamicContract) -> tuple[float, int]:
    """V1 and the date-1 action attaining it (ties go to innovation)."""
    safe, innov = first_period_values(prims, contract)
    return (innov, INNOVATE) if innov >= safe else (safe, SAFE)


def _mean_success(prims: DynamicPrimitives, state: RobustnessState, action: int) -> float:
    if action == SAFE:
        return prims.p
    return float(state.weights @ prims.thetas)


def _date1_success(prims: DynamicPrimitives, a1: int) -> float:
    return prims.p if a1 == SAFE else prims.m * prims.theta_H + (1 - prims.m) * prims.theta_L


def profit(prims: DynamicPrimitives, plan: ActionPlan, contract: DynamicContract) -> float:
    """Expected output, with the scale-up after early success and continued innovation, minus expected wages.

    Expectations use the mean models of the actions prescribed by ``plan``.
    """
    h = prims.wage_map.h
    q1 = _date1_success(prims, plan.a1)
    states = second_period_states(prims, plan.a1)
    total = q1
    for y1, py1 in ((0, 1 - q1), (1, q1)):
        act = plan.sigma2[y1]
        q2 = _mean_success(prims, states[y1], act)
        scale = prims.A if (plan.a1 == INNOVATE and y1 == 1 and act == INNOVATE) else 1.0
        wages = float(h(contract.x1[y1])) + (1 - q2) * float(h(contract.x2[y1, 0])) + q2 * float(h(contract.x2[y1, 1]))
        total += py1 * (scale * q2 - wages)
    return total


def wage_bill(prims: DynamicPrimitives, plan: ActionPlan, contract: DynamicContract) -> float:
    """Expected wages under the plan's mean models."""
    h = prims.wage_map.h
    q1 = _date1_success(prims, plan.a1)
    states = second_period_states(prims, plan.a1)
    total = 0.0
    for y1, py1 in ((0, 1 - q1), (1, q1)):
        q2 = _mean_success(prims, states[y1], plan.sigma2[y1])
        total += py1 * (float(h(contract.x1[y1])) + (1 - q2) * float(h(contract.x2[y1, 0])) + q2 * float(h(contract.x2[y1, 1])))
    return total


# --- node shapes ---------------------------------------------------------------------------------


def binding_spreads(prims: DynamicPrimitives, state: RobustnessState) -> list[float]:
    """All spreads zeta with incentive gap exactly k at ``state``, each on the side where gap >= k.

    Raises :class:`InfeasibleError` when the capacity falls short of k or equals it
    without being attained.
    """
    cap = incentive_capacity(state, prims)
    if cap.value < prims.k or (cap.value == prims.k and not cap.attained):
        raise InfeasibleError(
            "innovation is not implementable at this state",
            {"m": state.m, "lambda": state.lam, "capacity": cap.value, "k": prims.k},
        )
    kind = classify_intensity(state.lam)
    th, w, p, k = prims.thetas, state.weights, prims.p, prims.k
    if kind == "zero":
        drift = float(w @ th) - p
        zeta = k / drift
        toward = math.copysign(math.inf, drift)
        while drift * zeta < k:
            zeta = math.nextafter(zeta, toward)
        return [zeta]

    lam = state.lam

    def excess(s: np.ndarray) -> np.ndarray:
        return _arc_binary(th, w, s, 1.0) - _ce_binary(p, s, 1.0) - lam * k

    roots = sign_change_roots(excess, -NODE_SCAN_HALF_WIDTH, NODE_SCAN_HALF_WIDTH, NODE_SCAN_POINTS, nonnegative=True)
    out = [s / lam for s in roots]
    if not out and cap.attained and cap.argmax_spread is not None:
        out.append(cap.argmax_spread)
    if not out:
        raise InfeasibleError(
            "no binding spread found inside the search window",
            {"m": state.m, "lambda": lam, "capacity": cap.value, "k": k},
        )
    return out


@dataclass
class _Node:
    shape: np.ndarray  # x2(y1, .) minus its level
    on_value: float  # continuation value of the shape in the on-path state
    off_value: float  # continuation value of the shape in the off-path state
    q2: float  # mean success probability of y2 under the prescribed action


def _make_node(prims, plan, y1, zeta, on_state, off_state) -> _Node:
    shape = np.array([0.0, zeta])
    on_v, act = continuation_value(prims, on_state, shape)
    if act != plan.sigma2[y1]:
        raise InfeasibleError(f"node y1={y1} shape does not induce the prescribed action", {"node": y1})
    off_v, _ = continuation_value(prims, off_state, shape)
    return _Node(shape, on_v, off_v, _mean_success(prims, on_state, plan.sigma2[y1]))


def _split(prims: DynamicPrimitives, node: _Node, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Least-cost (x1, v) with x1 + delta * v = z, vectorized over z.

    The first-order condition delta * h'(z - delta v) = d/dv node_cost(v) has a
    left side decreasing and a right side increasing in v; it is solved by a
    bracketed bisection. Returns (x1, v, cost).
    """
    h, dh, d = prims.wage_map.h, prims.wage_map.dh, prims.delta
    qv = np.array([1 - node.q2, node.q2])

    def node_x(v):
        return node.shape[None, :] + (v - node.on_value)[:, None]

    def foc(v):
        return d * dh(z - d * v) - dh(node_x(v)) @ qv

    lo = z.copy()
    hi = z.copy()
    step = np.ones_like(z)
    for _ in range(200):
        bad = foc(lo) <= 0
        if not bad.any():
            break
        lo = np.where(bad, lo - step, lo)
        step = np.where(bad, step * 2, step)
    step = np.ones_like(z)
    for _ in range(200):
        bad = foc(hi) >= 0
        if not bad.any():
            break
        hi = np.where(bad, hi + step, hi)
        step = np.where(bad, step * 2, step)
    for _ in range(SPLIT_BISECTIONS):
        mid = 0.5 * (lo + hi)
        pos = foc(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi - lo <= 1e-13 * np.maximum(1.0, np.abs(mid))):
            break
    v = 0.5 * (lo + hi)
    x1 = z - d * v
    cost = h(x1) + h(node_x(v)) @ qv
    return x1, v, cost


class _FirstPeriod:
    """Cost and incentive constraint as functions of the spread of z = x1 + delta * v."""

    def __init__(self, prims: DynamicPrimitives, plan: ActionPlan, nodes: tuple[_Node, _Node]):
        self.prims, self.plan, self.nodes = prims, plan, nodes
        d = prims.delta
        # off-path z differs from on-path z by delta * (off - on) at each node
        self.off0 = d * (nodes[0].off_value - nodes[0].on_value)
        self.off_spread = d * ((nodes[1].off_value - nodes[1].on_value) - (nodes[0].off_value - nodes[0].on_value))
        self.q1 = _date1_success(prims, plan.a1)

    def _safe(self, zeta):
        return _ce_binary(self.prims.p, zeta, self.prims.lambda1)

    def _innov(self, zeta):
        pr = self.prims
        return _arc_binary(pr.thetas, np.array([1 - pr.m, pr.m]), zeta, pr.lambda1) - pr.k

    def ic(self, zeta: np.ndarray) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=float)
        shifted = zeta + self.off_spread
        if self.plan.a1 == INNOVATE:
            return self._innov(zeta) - (self.off0 + self._safe(shifted))
        return self._safe(zeta) - (self.off0 + self._innov(shifted))

    def z(self, zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        zeta = np.asarray(zeta, dtype=float)
        on = self._innov(zeta) if self.plan.a1 == INNOVATE else self._safe(zeta)
        z0 = self.prims.U0 - on
        return z0, z0 + zeta

    def cost(self, zeta: np.ndarray) -> np.ndarray:
        z0, z1 = self.z(zeta)
        c0 = _split(self.prims, self.nodes[0], np.atleast_1d(z0))[2]
        c1 = _split(self.prims, self.nodes[1], np.atleast_1d(z1))[2]
        return (1 - self.q1) * c0 + self.q1 * c1


def _first_period_candidates(fp: _FirstPeriod) -> list[float]:
    u = np.linspace(-FIRST_PERIOD_SINH_RANGE, FIRST_PERIOD_SINH_RANGE, FIRST_PERIOD_SCAN_POINTS)
    grid = np.sinh(u)
    ic = fp.ic(grid)
    feasible = ic >= 0.0
    if not feasible.any():
        return []
    cost = np.where(feasible, fp.cost(grid), math.inf)
    cands = []
    i = int(np.argmin(cost))
    cands.append(float(grid[i]))
    # local refinement inside the feasible cell around the best grid point
    j0 = max(i - 1, 0)
    j1 = min(i + 1, grid.size - 1)
    if feasible[j0] and feasible[j1] and j1 > j0:
        zs, _ = golden_max(lambda t: -float(fp.cost(np.array([t]))[0]), float(grid[j0]), float(grid[j1]), 1e-12)
        if fp.ic(np.array([zs]))[0] >= 0.0:
            cands.append(zs)
    # incentive-boundary points, taken on the feasible side
    for j in np.flatnonzero(feasible[:-1] != feasible[1:]):
        a, b = float(grid[j]), float(grid[j + 1])
        fa_feas = bool(feasible[j])
        for _ in range(200):
            mid = 0.5 * (a + b)
            if mid in (a, b):
                break
            if (fp.ic(np.array([mid]))[0] >= 0.0) == fa_feas:
                a = mid
            else:
                b = mid
        cands.append(a if fa_feas else b)
    return cands


def solve_plan(prims: DynamicPrimitives, plan: ActionPlan) -> PlanSolution:
    """Least-cost contract implementing ``plan`` with binding participation.

    Raises :class:`InfeasibleError` naming the node (``0``, ``1`` or ``"t1"``) where
    the plan cannot be implemented.
    """
    on_states = second_period_states(prims, plan.a1)
    off_states = second_period_states(prims, SAFE if plan.a1 == INNOVATE else INNOVATE)

    options: list[list[float]] = []
    for y1 in (0, 1):
        if plan.sigma2[y1] == SAFE:
            options.append([0.0])
            continue
        try:
            options.append(binding_spreads(prims, on_states[y1]))
        except InfeasibleError as exc:
            cert = dict(exc.certificate)
            cert["node"] = y1
            raise InfeasibleError(f"plan {plan.label}: innovation after y1={y1} is not implementable", cert) from None

    best = None
    for zetas in itertools.product(*options):
        nodes = tuple(_make_node(prims, plan, y1, zetas[y1], on_states[y1], off_states[y1]) for y1 in (0, 1))
        fp = _FirstPeriod(prims, plan, nodes)
        for zs in _first_period_candidates(fp):
            c = float(fp.cost(np.array([zs]))[0])
            if best is None or c < best[0] - 1e-12:
                best = (c, zs, fp, zetas)
    if best is None:
        raise InfeasibleError(
            f"plan {plan.label}: no first-period contract induces a1={plan.a1}", {"node": "t1", "k": prims.k}
        )

    _, zs, fp, zetas = best
    z0, z1 = fp.z(np.array([zs]))
    x1 = np.empty(2)
    x2 = np.empty((2, 2))
    for y1, zz in ((0, z0), (1, z1)):
        node = fp.nodes[y1]
        xa, v, _ = _split(prims, node, np.atleast_1d(zz))
        x1[y1] = xa[0]
        x2[y1] = node.shape + (v[0] - node.on_value)
    contract = DynamicContract(x1, x2)
    return _verify(prims, plan, contract, zetas, on_states)


def _verify(prims, plan, contract, zetas, on_states) -> PlanSolution:
    v1, a1 = agent_value(prims, contract)
    gap1 = first_period_gap(prims, contract)
    reports = []
    for y1 in (0, 1):
        state = on_states[y1]
        val, act = continuation_value(prims, state, contract.x2[y1])
        safe, innov = _node_values(prims, state, contract.x2[y1])
        cap = incentive_capacity(state, prims).value if plan.sigma2[y1] == INNOVATE else None
        reports.append(NodeReport(y1, state, act, float(zetas[y1]), innov + prims.k - safe, cap))
        prescribed = innov if plan.sigma2[y1] == INNOVATE else safe
        if prescribed < max(safe, innov) - WEAK_TOL:
            raise InfeasibleError(f"plan {plan.label}: node y1={y1} selects action {act}", {"node": y1})
        if plan.sigma2[y1] == INNOVATE and abs(innov - safe) > SOLVE_TOL:
            raise InfeasibleError(f"plan {plan.label}: node y1={y1} gap is not binding", {"node": y1})
    if (gap1 < -WEAK_TOL) if plan.a1 == INNOVATE else (gap1 > WEAK_TOL):
        raise InfeasibleError(f"plan {plan.label}: date-1 action is {a1}", {"node": "t1", "gap": gap1})
    if abs(v1 - prims.U0) > SOLVE_TOL:
        raise InfeasibleError(f"plan {plan.label}: participation is off by {v1 - prims.U0:.3e}", {"node": "t1"})
    return PlanSolution(
        plan=plan,
        contract=contract,
        profit=profit(prims, plan, contract),
        v1=v1,
        wage_bill=wage_bill(prims, plan, contract),
        first_period_gap=gap1,
        node_reports=reports,
    )


def enumerate_plans(prims: DynamicPrimitives) -> list[tuple[ActionPlan, PlanSolution | InfeasibleError]]:
    """Solve every plan in lexicographic order; infeasible plans carry their error."""
    out: list[tuple[ActionPlan, PlanSolution | InfeasibleError]] = []
    for plan in ALL_PLANS:
        try:
            out.append((plan, solve_plan(prims, plan)))
        except InfeasibleError as exc:
            out.append((plan, exc))
    return out


def best_plan(prims: DynamicPrimitives, solved: list | None = None) -> PlanSolution:
    """Most profitable implementable plan; ties keep the lexicographically first plan."""
    results = enumerate_plans(prims) if solved is None else solved
    best = None
    for _, sol in results:
        if isinstance(sol, PlanSolution) and (best is None or sol.profit > best.profit):
            best = sol
    assert best is not None, "the all-safe plan is always implementable"
    return best
