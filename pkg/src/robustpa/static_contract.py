"""One-shot contracting problem: implement a target action at least wage cost.

The principal minimizes the expected wage under the target action's mean model
subject to participation (ARC value at least U0) and incentive compatibility
(no other action has a higher ARC value). Both constraints are evaluated with the
entropic machinery in :mod:`robustpa.entropic`.

Because every ARC value shifts one-for-one with a common translation of the
contract, the solver works on the normalized shape d = x - x[0] and recovers the
level from the binding participation constraint. Incentive constraints depend on
the shape only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize

from robustpa.entropic import (
    Roadmap,
    arc_gradient,
    arc_value,
    avg_kl_distortion,
    classify_intensity,
    validate_profile,
)
from robustpa.errors import DomainError, InfeasibleError
from robustpa.wagemap import WageMap

FEAS_TOL = 1e-6
INFEASIBLE_TOL = 1e-4
BIND_TOL = 1e-6
N_STARTS = 16


@dataclass(frozen=True)
class ActionSpec:
    name: str
    roadmap: Roadmap
    cost: float


@dataclass(frozen=True)
class StaticScenario:
    actions: tuple[ActionSpec, ...]
    lam: float
    U0: float = 0.0
    wage_map: WageMap = field(default_factory=WageMap)
    outcomes: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        acts = tuple(self.actions)
        if not acts:
            raise DomainError("a scenario needs at least one action")
        n = acts[0].roadmap.n_outcomes
        names = [a.name for a in acts]
        if len(set(names)) != len(names):
            raise DomainError(f"action names must be distinct, got {names}")
        for a in acts:
            if a.roadmap.n_outcomes != n:
                raise DomainError(f"action {a.name!r} lives on {a.roadmap.n_outcomes} outcomes, expected {n}")
            if not math.isfinite(a.cost):
                raise DomainError(f"action {a.name!r} has non-finite cost")
        classify_intensity(self.lam)
        labels = self.outcomes
        if labels is None:
            labels = tuple(str(i) for i in range(n))
        if len(labels) != n or len(set(labels)) != n:
            raise DomainError(f"outcome labels {labels} do not match {n} distinct outcomes")
        object.__setattr__(self, "actions", acts)
        object.__setattr__(self, "outcomes", tuple(labels))

    @property
    def n_outcomes(self) -> int:
        return self.actions[0].roadmap.n_outcomes

    def action(self, name: str) -> ActionSpec:
        for a in self.actions:
            if a.name == name:
                return a
        raise DomainError(f"unknown action {name!r}; known: {[a.name for a in self.actions]}")

    def with_lambda(self, lam: float) -> "StaticScenario":
        return StaticScenario(self.actions, lam, self.U0, self.wage_map, self.outcomes)

    def with_roadmap(self, name: str, roadmap: Roadmap) -> "StaticScenario":
        acts = tuple(ActionSpec(a.name, roadmap, a.cost) if a.name == name else a for a in self.actions)
        return StaticScenario(acts, self.lam, self.U0, self.wage_map, self.outcomes)


@dataclass
class ContractSolution:
    x: np.ndarray
    wage_bill: float
    ir_slack: float
    ic_slacks: dict[str, float]
    binding_set: frozenset[str]
    multipliers: dict[str, float] = field(default_factory=dict)
    solver_trace: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.ir_slack >= -FEAS_TOL and all(v >= -FEAS_TOL for v in self.ic_slacks.values())

    @property
    def max_violation(self) -> float:
        return max([0.0, -self.ir_slack] + [-v for v in self.ic_slacks.values()])


def wage_bill(s: StaticScenario, a_star: str, x: Sequence[float]) -> float:
    """Expected wage under the target action's mean model."""
    xa = validate_profile(x, s.n_outcomes)
    qbar = s.action(a_star).roadmap.mean_model
    return float(qbar @ s.wage_map.h(xa))


def feasibility_report(s: StaticScenario, a_star: str, x: Sequence[float]) -> ContractSolution:
    """Participation and incentive slacks of ``x`` together with its wage bill."""
    xa = validate_profile(x, s.n_outcomes)
    target = s.action(a_star)
    f_star = arc_value(target.roadmap, xa, s.lam, target.cost)
    ic = {a.name: f_star - arc_value(a.roadmap, xa, s.lam, a.cost) for a in s.actions if a.name != a_star}
    binding = frozenset(k for k, v in ic.items() if abs(v) <= BIND_TOL)
    return ContractSolution(
        x=xa.copy(),
        wage_bill=wage_bill(s, a_star, xa),
        ir_slack=f_star - s.U0,
        ic_slacks=ic,
        binding_set=binding,
        solver_trace={"kind": "report"},
    )


class _Reduced:
    """The problem on shapes d in R^(n-1), with x = (0, d) + level(d)."""

    def __init__(self, s: StaticScenario, a_star: str):
        self.s = s
        self.target = s.action(a_star)
        self.others = [a for a in s.actions if a.name != a_star]
        self.qbar = self.target.roadmap.mean_model
        self.n = s.n_outcomes

    def profile(self, d: np.ndarray) -> np.ndarray:
        x0 = np.concatenate(([0.0], d))
        level = self.s.U0 - arc_value(self.target.roadmap, x0, self.s.lam, self.target.cost)
        return x0 + level

    def wage(self, d: np.ndarray) -> tuple[float, np.ndarray]:
        x = self.profile(d)
        w = self.qbar * self.s.wage_map.dh(x)
        pi = arc_gradient(self.target.roadmap, x, self.s.lam)
        grad = w - w.sum() * pi
        return float(self.qbar @ self.s.wage_map.h(x)), grad[1:]

    def ics(self, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = self.profile(d)
        lam = self.s.lam
        f_star = arc_value(self.target.roadmap, x, lam, self.target.cost)
        pi_star = arc_gradient(self.target.roadmap, x, lam)
        vals = np.empty(len(self.others))
        grads = np.empty((len(self.others), self.n - 1))
        for i, a in enumerate(self.others):
            vals[i] = f_star - arc_value(a.roadmap, x, lam, a.cost)
            grads[i] = (pi_star - arc_gradient(a.roadmap, x, lam))[1:]
        return vals, grads


def _augmented_lagrangian(prob: _Reduced, d0: np.ndarray, max_outer: int = 60) -> tuple[np.ndarray, int]:
    m = len(prob.others)
    nu = np.zeros(m)
    c0, _ = prob.ics(d0)
    # a feasible start keeps a stiff penalty so descent cannot cross into a disconnected infeasible region
    rho = 1e4 if m == 0 or np.min(c0) >= 0.0 else 10.0
    d = d0.copy()
    prev_viol = math.inf

    def objective(z: np.ndarray) -> tuple[float, np.ndarray]:
        f, g = prob.wage(z)
        c, jc = prob.ics(z)
        active = c <= nu / rho
        pen = np.where(active, -nu * c + 0.5 * rho * c * c, -0.5 * nu * nu / rho)
        coef = np.where(active, -nu + rho * c, 0.0)
        return f + float(pen.sum()), g + coef @ jc

    outer = 0
    for outer in range(1, max_outer + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            res = optimize.minimize(objective, d, jac=True, method="BFGS", options={"gtol": 1e-11, "maxiter": 500})
        if np.all(np.isfinite(res.x)):
            d = res.x
        c, _ = prob.ics(d)
        viol = float(np.max(np.maximum(-c, 0.0))) if m else 0.0
        nu = np.maximum(0.0, nu - rho * c)
        if viol <= 1e-11 and outer > 1:
            break
        if viol > 0.25 * prev_viol:
            rho = min(rho * 10.0, 1e9)
        prev_viol = viol
    return d, outer


def _kkt_polish(prob: _Reduced, d: np.ndarray) -> np.ndarray | None:
    """Newton solve of stationarity plus the active incentive constraints."""
    c, _ = prob.ics(d)
    active = np.flatnonzero(c <= 1e-6)
    k = d.size
    if active.size == 0 or active.size > k:
        return None
    _, g = prob.wage(d)
    _, jc = prob.ics(d)
    beta0, *_ = np.linalg.lstsq(jc[active].T, g, rcond=None)

    def system(z: np.ndarray) -> np.ndarray:
        dd, beta = z[:k], z[k:]
        _, gw = prob.wage(dd)
        cv, jv = prob.ics(dd)
        return np.concatenate((gw - beta @ jv[active], cv[active]))

    with np.errstate(over="ignore", invalid="ignore"):
        sol = optimize.root(system, np.concatenate((d, beta0)), method="hybr", options={"xtol": 1e-14})
    if not sol.success or not np.all(np.isfinite(sol.x)):
        return None
    dd, beta = sol.x[:k], sol.x[k:]
    cv, _ = prob.ics(dd)
    if np.any(beta < -1e-9) or np.any(cv < -1e-10):
        return None
    return dd


def _start_points(prob: _Reduced, rng: np.random.Generator) -> list[np.ndarray]:
    k = prob.n - 1
    scales = np.array([0.1, 0.3, 1.0, 3.0, 10.0, 30.0])
    axis = np.concatenate((-scales[::-1], [0.0], scales))
    if k <= 2:
        mesh = np.meshgrid(*([axis] * k), indexing="ij")
        cands = np.stack([mm.ravel() for mm in mesh], axis=1)
        cands = np.vstack((cands, rng.uniform(-30.0, 30.0, size=(2 * N_STARTS, k))))
    else:
        dirs = rng.normal(size=(400, k))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        cands = dirs * rng.choice(scales, size=(400, 1))
    scored = []
    for z in cands:
        with np.errstate(over="ignore", invalid="ignore"):
            f, _ = prob.wage(z)
            c, _ = prob.ics(z)
        viol = float(np.sum(np.maximum(-c, 0.0) ** 2)) if c.size else 0.0
        score = f + 1e3 * viol
        if math.isfinite(score):
            scored.append((score, tuple(z)))
    scored.sort()
    starts = [np.zeros(k)]
    for _, z in scored:
        if len(starts) >= N_STARTS:
            break
        if any(z) and not any(np.array_equal(np.asarray(z), s0) for s0 in starts):
            starts.append(np.asarray(z, dtype=float))
    return starts


def solve_static(s: StaticScenario, a_star: str, seed: int = 0) -> ContractSolution:
    """Least-cost contract implementing ``a_star``.

    Raises :class:`InfeasibleError` when no start reaches a point violating the
    constraints by at most ``INFEASIBLE_TOL``.
    """
    target = s.action(a_star)
    n = s.n_outcomes
    if all(target.cost <= a.cost for a in s.actions):
        # a constant contract meets IR with equality and every IC weakly
        x0 = np.full(n, s.U0 + target.cost)
        sol = feasibility_report(s, a_star, x0)
        sol.solver_trace = {"kind": "constant", "reason": "target action is least-cost"}
        sol.multipliers = _multipliers(s, a_star, x0)
        return sol

    prob = _Reduced(s, a_star)
    rng = np.random.default_rng(seed)
    results = []
    for i, d0 in enumerate(_start_points(prob, rng)):
        d, outer = _augmented_lagrangian(prob, d0)
        polished = _kkt_polish(prob, d)
        used_polish = False
        if polished is not None:
            wp, _ = prob.wage(polished)
            wd, _ = prob.wage(d)
            cd, _ = prob.ics(d)
            if wp <= wd + 1e-9 or np.min(cd) < -1e-9:
                d, used_polish = polished, True
        sol = feasibility_report(s, a_star, prob.profile(d))
        results.append((sol, {"start": i, "outer_iterations": outer, "polished": used_polish}))

    feasible = [(sol, tr) for sol, tr in results if sol.max_violation <= FEAS_TOL]
    if not feasible:
        best, tr = min(results, key=lambda r: r[0].max_violation)
        if best.max_violation > INFEASIBLE_TOL:
            raise InfeasibleError(
                f"no contract implements {a_star!r}: best violation {best.max_violation:.3e}",
                {"best_violation": best.max_violation, "x": best.x.tolist(), "ic_slacks": best.ic_slacks},
            )
        feasible = [(best, tr)]
    lowest = min(sol.wage_bill for sol, _ in feasible)
    ties = [(sol, tr) for sol, tr in feasible if sol.wage_bill <= lowest + 1e-12]
    best, tr = min(ties, key=lambda r: tuple(r[0].x))
    best.solver_trace = {"kind": "multistart", "n_starts": len(results), "winner": tr}
    best.multipliers = _multipliers(s, a_star, best.x)
    return best


def _multipliers(s: StaticScenario, a_star: str, x: np.ndarray) -> dict[str, float]:
    """Least-squares KKT multipliers at ``x``: IR under key ``"IR"``, ICs by action name."""
    if classify_intensity(s.lam) == "inf":
        return {}
    target = s.action(a_star)
    qbar = target.roadmap.mean_model
    grad_w = qbar * s.wage_map.dh(x)
    pi_star = arc_gradient(target.roadmap, x, s.lam)
    cols = [pi_star]
    names = ["IR"]
    for a in s.actions:
        if a.name == a_star:
            continue
        slack = arc_value(target.roadmap, x, s.lam, target.cost) - arc_value(a.roadmap, x, s.lam, a.cost)
        if abs(slack) <= BIND_TOL:
            cols.append(pi_star - arc_gradient(a.roadmap, x, s.lam))
            names.append(a.name)
    coef, *_ = np.linalg.lstsq(np.stack(cols, axis=1), grad_w, rcond=None)
    return {nm: float(c) for nm, c in zip(names, coef)}


@dataclass
class LambdaReport:
    lambdas: list[float]
    wage_bills: list[float]
    condition_holds: bool
    delta_monotone: bool
    nesting_holds: bool
    wage_bills_monotone: bool


def lambda_comparative(
    s: StaticScenario,
    a_star: str,
    lam_grid: Iterable[float],
    samples: np.ndarray | None = None,
    n_samples: int = 200,
    seed: int = 0,
) -> LambdaReport:
    """Check the distortion-ordering condition on sampled profiles and re-solve along ``lam_grid``.

    The condition is that the target's average KL distortion weakly dominates every
    other action's. Where it holds, each incentive wedge must be weakly decreasing in
    lambda and feasible sets must shrink as lambda grows.
    """
    lams = [float(v) for v in lam_grid]
    if any(b <= a for a, b in zip(lams, lams[1:])) or any(classify_intensity(v) != "finite" for v in lams):
        raise DomainError("lambda grid must be strictly increasing, finite and positive")
    target = s.action(a_star)
    others = [a for a in s.actions if a.name != a_star]
    if samples is None:
        samples = np.random.default_rng(seed).normal(scale=2.0, size=(n_samples, s.n_outcomes))
    samples = np.atleast_2d(np.asarray(samples, dtype=float))

    condition = True
    monotone = True
    nesting = True
    for x in samples:
        k_star = np.array([avg_kl_distortion(target.roadmap, x, lam) for lam in lams])
        holds_here = True
        for a in others:
            k_a = np.array([avg_kl_distortion(a.roadmap, x, lam) for lam in lams])
            if np.any(k_star < k_a - 1e-12):
                holds_here = False
                condition = False
        if not holds_here:
            continue
        for a in others:
            wedge = [arc_value(target.roadmap, x, lam, target.cost) - arc_value(a.roadmap, x, lam, a.cost) for lam in lams]
            if any(w2 > w1 + 1e-12 for w1, w2 in zip(wedge, wedge[1:])):
                monotone = False
        # place each sample on the IR boundary at the largest lambda, then test membership downward
        shifted = x + s.U0 - arc_value(target.roadmap, x, lams[-1], target.cost)
        member = [feasibility_report(s.with_lambda(lam), a_star, shifted).max_violation <= 1e-12 for lam in lams]
        for i in range(len(lams)):
            for j in range(i + 1, len(lams)):
                if member[j] and not member[i]:
                    nesting = False

    bills = []
    for lam in lams:
        try:
            bills.append(solve_static(s.with_lambda(lam), a_star, seed=seed).wage_bill)
        except InfeasibleError:
            bills.append(math.inf)
    bills_monotone = all(b2 >= b1 - FEAS_TOL for b1, b2 in zip(bills, bills[1:]))
    return LambdaReport(lams, bills, condition, monotone, nesting, bills_monotone)


@dataclass
class SpreadComparison:
    original: float
    spread: float

    @property
    def dominated(self) -> bool:
        return self.spread <= self.original + FEAS_TOL


def mps_compare(s: StaticScenario, a_star: str, spread: Roadmap, seed: int = 0) -> SpreadComparison:
    """Minimized wage bills under the target roadmap and under a mean-preserving spread of it."""
    base = s.action(a_star).roadmap
    if spread.n_outcomes != base.n_outcomes or np.max(np.abs(spread.mean_model - base.mean_model)) > 1e-10:
        raise DomainError("spread roadmap must have the same mean model as the target roadmap")
    w0 = solve_static(s, a_star, seed=seed).wage_bill
    w1 = solve_static(s.with_roadmap(a_star, spread), a_star, seed=seed).wage_bill
    return SpreadComparison(w0, w1)
