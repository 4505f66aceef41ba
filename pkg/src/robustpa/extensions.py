"""Roadmap design under a credibility cost, three-outcome milestones, and shirking.

Roadmap design: the principal picks both the contract and the prior over
innovation models, paying (1/rho) KL(mu || mu0) for departing from a baseline.
Given the contract, the prior problem has one effective linear constraint
sum_q mu(q) g_q(x) >= k + max(U0, g_{q1}(x)) and its solution is the exponential
tilt mu(q) ∝ mu0(q) exp(rho (nu g_q(x) - E_q[h(x)])) with a scalar dual nu >= 0.

Milestones: outcomes are indexed 0 (failure), 1 (breakthrough) and 2 (milestone d).
Every capacity is the largest face value, where a face keeps a nonempty subset S of
outcomes at finite utility and sends the rest to +inf; the gap on that face uses
the sub-probability masses on S.

Shirking: a third action 0 with a known model and no cost; innovation must beat
both shirking (by k) and routine execution (by k - k1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy import optimize

from robustpa._search import scan_then_golden
from robustpa.dynamics_state import _scaled_gaps, binary_capacity, gap_limits
from robustpa.entropic import Roadmap, certainty_equivalent, certainty_equivalents, classify_intensity, validate_model
from robustpa.errors import DomainError, InfeasibleError
from robustpa.static_contract import ActionSpec, StaticScenario, solve_static
from robustpa.wagemap import WageMap

DESIGN_TV_TOL = 1e-8
DESIGN_MAX_ITER = 500
FACE_HALF_WIDTH = 50.0
FACE_SCAN_POINTS = 4001
FACE_GRID = 81
ATTAIN_MARGIN = 1e-9


# --- roadmap design ------------------------------------------------------------------------------


@dataclass(frozen=True)
class RoadmapDesignProblem:
    """Choose (x, mu) to minimize E_mu E_q[h(x)] + KL(mu || mu0) / rho subject to PK and safe IC."""

    Q2: np.ndarray
    mu0: np.ndarray
    rho: float
    lam: float
    k: float
    U0: float
    q1: np.ndarray
    wage_map: WageMap = field(default_factory=WageMap)

    def __post_init__(self) -> None:
        Q2 = np.atleast_2d(np.asarray(self.Q2, dtype=float))
        rows = np.vstack([validate_model(r) for r in Q2])
        mu0 = validate_model(self.mu0)
        q1 = validate_model(self.q1)
        if mu0.size != rows.shape[0] or q1.size != rows.shape[1]:
            raise DomainError("baseline prior needs one weight per model and q1 the same outcomes as Q2")
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise DomainError(f"credibility sensitivity rho must be positive and finite, got {self.rho}")
        if classify_intensity(self.lam) != "finite":
            raise DomainError("roadmap design needs a finite positive intensity")
        for arr in (rows, mu0, q1):
            arr.setflags(write=False)
        object.__setattr__(self, "Q2", rows)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "q1", q1)

    def scenario(self, mu: np.ndarray) -> StaticScenario:
        return StaticScenario(
            (ActionSpec("safe", Roadmap.singleton(self.q1), 0.0), ActionSpec("innovate", Roadmap(self.Q2, mu), self.k)),
            self.lam,
            self.U0,
            self.wage_map,
        )

    def objective(self, x: np.ndarray, mu: np.ndarray) -> float:
        costs = self.Q2 @ self.wage_map.h(x)
        kl = float(np.sum(mu * (np.log(mu) - np.log(self.mu0))))
        return float(mu @ costs) + kl / self.rho


@dataclass
class RoadmapDesign:
    x: np.ndarray
    mu: np.ndarray
    eta: float
    beta: float
    nu: float
    objective: float
    iterations: int
    converged: bool
    objective_history: list[float]
    kkt_residuals: dict[str, float]
    slater_margin: float

    @property
    def monotone(self) -> bool:
        h = self.objective_history
        return all(b <= a + 1e-10 * max(1.0, abs(a)) for a, b in zip(h, h[1:]))


def logit_tilt(prob: RoadmapDesignProblem, x: np.ndarray, eta: float, beta: float) -> np.ndarray:
    """mu(q) ∝ mu0(q) exp(rho (S_x(q) - E_q[h(x)])) with S_x(q) = eta g_q + beta (g_q - g_{q1})."""
    b = certainty_equivalents(prob.Q2, x, prob.lam)
    g1 = certainty_equivalent(prob.q1, x, prob.lam)
    c = prob.Q2 @ prob.wage_map.h(x)
    score = eta * b + beta * (b - g1)
    logits = np.log(prob.mu0) + prob.rho * (score - c)
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def _contract_step(prob: RoadmapDesignProblem, mu: np.ndarray, seed: int):
    """Least-cost contract at prior ``mu`` with its PK and IC multipliers."""
    try:
        sol = solve_static(prob.scenario(mu), "innovate", seed=seed)
    except InfeasibleError as exc:
        raise InfeasibleError(
            f"no contract implements innovation at prior {mu.tolist()}: {exc}", {**exc.certificate, "mu": mu.tolist()}
        ) from exc
    eta = max(sol.multipliers.get("IR", 0.0), 0.0)
    beta = max(sol.multipliers.get("safe", 0.0), 0.0)
    return sol, eta, beta


def design_roadmap(prob: RoadmapDesignProblem, max_iter: int = DESIGN_MAX_ITER, seed: int = 0) -> RoadmapDesign:
    """Fixed point of the logit tilt with the contract re-solved at every prior.

    At prior mu the x-step returns the least-cost contract and its multipliers on
    PK and IC; by the envelope theorem these give the gradient of the reduced
    objective V(mu) = W(mu) + KL(mu || mu0) / rho, and the closed-form tilt is the
    mirror step. Steps are damped in log space and halved until V decreases, so the
    recorded objective is monotone. Stops when the tilt moves mu by at most
    ``DESIGN_TV_TOL`` in total variation.
    """
    mu = prob.mu0.copy()
    sol, eta, beta = _contract_step(prob, mu, seed)
    value = prob.objective(sol.x, mu)
    history = [value]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        target = logit_tilt(prob, sol.x, eta, beta)
        if 0.5 * float(np.sum(np.abs(target - mu))) <= DESIGN_TV_TOL:
            converged = True
            break
        step = 1.0
        accepted = False
        while step >= 1e-6:
            logs = (1 - step) * np.log(mu) + step * np.log(target)
            cand = np.exp(logs - logs.max())
            cand /= cand.sum()
            try:
                c_sol, c_eta, c_beta = _contract_step(prob, cand, seed)
            except InfeasibleError:
                step *= 0.5
                continue
            c_value = prob.objective(c_sol.x, cand)
            if c_value <= value + 1e-10 * max(1.0, abs(value)):
                mu, sol, eta, beta, value = cand, c_sol, c_eta, c_beta, c_value
                history.append(value)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    x = sol.x
    g1 = certainty_equivalent(prob.q1, x, prob.lam)
    b = certainty_equivalents(prob.Q2, x, prob.lam)
    residuals = {
        "tilt": float(np.max(np.abs(logit_tilt(prob, x, eta, beta) - mu))),
        "pk": float(mu @ b) - prob.k - prob.U0,
        "ic": float(mu @ b) - prob.k - g1,
        "pk_complementarity": eta * (float(mu @ b) - prob.k - prob.U0),
        "ic_complementarity": beta * (float(mu @ b) - prob.k - g1),
    }
    return RoadmapDesign(
        x=x,
        mu=mu,
        eta=eta,
        beta=beta,
        nu=eta + beta,
        objective=value,
        iterations=it,
        converged=converged,
        objective_history=history,
        kkt_residuals=residuals,
        slater_margin=float(np.max(b) - prob.k - max(prob.U0, g1)),
    )


def reduced_objective(prob: RoadmapDesignProblem, mu: Sequence[float], seed: int = 0) -> float:
    """V(mu): least wage bill at prior mu plus the credibility cost."""
    m = validate_model(mu)
    sol, _, _ = _contract_step(prob, m, seed)
    return prob.objective(sol.x, m)


# --- three-outcome milestones --------------------------------------------------------------------


@dataclass(frozen=True)
class ThreeOutcomePrimitives:
    """Outcome order (failure, breakthrough, milestone d)."""

    p: float
    psi: float
    theta_L: float
    theta_H: float
    eps_L: float
    eps_H: float
    m: float = 0.5
    k: float = 1.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.theta_L < self.p < self.theta_H < 1.0:
            raise DomainError("need 0 < theta_L < p < theta_H < 1")
        for name, succ, d in (("q1", self.p, self.psi), ("q_L", self.theta_L, self.eps_L), ("q_H", self.theta_H, self.eps_H)):
            if not (d > 0.0 and succ + d < 1.0):
                raise DomainError(f"{name} must have full support on three outcomes")

    @property
    def q1(self) -> np.ndarray:
        return np.array([1 - self.p - self.psi, self.p, self.psi])

    @property
    def Q2(self) -> np.ndarray:
        return np.array(
            [
                [1 - self.theta_L - self.eps_L, self.theta_L, self.eps_L],
                [1 - self.theta_H - self.eps_H, self.theta_H, self.eps_H],
            ]
        )

    @classmethod
    def proportional(cls, p: float, theta_L: float, theta_H: float, eta: float, **kw) -> "ThreeOutcomePrimitives":
        """Every model splits its non-breakthrough mass as eta on d and 1 - eta on failure."""
        return cls(p, (1 - p) * eta, theta_L, theta_H, (1 - theta_L) * eta, (1 - theta_H) * eta, **kw)


def failure_aggregate(x0: float, xd: float, eta: float, lam: float) -> float:
    """Certainty equivalent of the non-breakthrough outcomes under a common composition eta."""
    return -(1.0 / lam) * float(np.logaddexp(math.log(eta) - lam * xd, math.log1p(-eta) - lam * x0))


def _face_gap(sub_q1: np.ndarray, sub_Q: np.ndarray, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Gap at lam = 1 on a face with sub-probability masses; ``x`` has shape (..., |S|)."""

    def g(q: np.ndarray) -> np.ndarray:
        return -np.logaddexp.reduce(np.log(q) - x, axis=-1)

    return sum(wi * g(q) for wi, q in zip(w, sub_Q) if wi > 0) - g(sub_q1)


@dataclass(frozen=True)
class MilestoneCapacity:
    value: float
    attained: bool
    argmax: np.ndarray | None
    faces: dict[tuple[int, ...], float]


def general_capacity(q1: np.ndarray, Q: np.ndarray, weights: Sequence[float], lam: float) -> MilestoneCapacity:
    """Capacity on any outcome set with at most three outcomes, by face enumeration.

    Singletons are closed-form ray limits, pairs are 1-D spread searches, and the
    full set is a grid scan followed by BFGS ascent from the best grid points.
    ``argmax`` is the maximizing profile at the given lam anchored at x[-1] = 0.
    """
    q1 = validate_model(q1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    w = np.asarray(weights, dtype=float)
    n = q1.size
    if n > 3:
        raise DomainError("face enumeration is implemented for at most three outcomes")
    kind = classify_intensity(lam)
    if kind == "inf":
        return MilestoneCapacity(0.0, True, np.zeros(n), {})
    if kind == "zero":
        drift = w @ Q - q1
        if np.max(np.abs(drift)) == 0.0:
            return MilestoneCapacity(0.0, True, np.zeros(n), {})
        return MilestoneCapacity(math.inf, False, None, {})

    faces: dict[tuple[int, ...], float] = {}
    for S in combinations(range(n), 1):
        faces[S] = float(_face_gap(q1[list(S)], Q[:, list(S)], w, np.zeros(1)))
    for S in combinations(range(n), 2):
        if len(S) == n:
            continue
        idx = list(S)
        f = lambda z, idx=idx: _face_gap(q1[idx], Q[:, idx], w, np.stack([np.zeros_like(z), z], axis=-1))
        _, v, _ = scan_then_golden(f, -FACE_HALF_WIDTH, FACE_HALF_WIDTH, FACE_SCAN_POINTS, 1e-10)
        faces[S] = float(v)

    full = tuple(range(n))
    best_x = None
    if n == 2:
        f = lambda z: _face_gap(q1, Q, w, np.stack([z, np.zeros_like(z)], axis=-1))
        z, v, _ = scan_then_golden(f, -FACE_HALF_WIDTH, FACE_HALF_WIDTH, FACE_SCAN_POINTS, 1e-10)
        interior, best_x = float(v), np.array([z, 0.0])
    else:
        grid = np.linspace(-FACE_HALF_WIDTH, FACE_HALF_WIDTH, FACE_GRID)
        A, B = np.meshgrid(grid, grid, indexing="ij")
        vals = _face_gap(q1, Q, w, np.stack([A, B, np.zeros_like(A)], axis=-1))
        order = np.argsort(vals, axis=None)[::-1][:8]
        interior = -math.inf
        for flat in order:
            i, j = np.unravel_index(flat, vals.shape)
            start = np.array([grid[i], grid[j]])
            res = optimize.minimize(
                lambda z: -float(_face_gap(q1, Q, w, np.array([z[0], z[1], 0.0]))), start, method="BFGS", options={"gtol": 1e-12}
            )
            cand = -float(res.fun)
            if cand > interior:
                interior, best_x = cand, np.array([res.x[0], res.x[1], 0.0])
    faces[full] = interior
    limit = max(v for S, v in faces.items() if S != full)
    attained = interior > limit + ATTAIN_MARGIN
    value = max(interior, limit)
    return MilestoneCapacity(
        value / lam, attained, best_x / lam if attained else None, {S: v / lam for S, v in faces.items()}
    )


def milestone_capacity(prims3: ThreeOutcomePrimitives, mu: Sequence[float], lam: float) -> MilestoneCapacity:
    """Capacity on {failure, breakthrough, milestone} at posterior weights ``mu`` over (q_L, q_H)."""
    return general_capacity(prims3.q1, prims3.Q2, mu, lam)


@dataclass(frozen=True)
class DiagnosticVerdict:
    rescue: bool
    margin: float
    T_bound: float | None


def diagnostic_condition(prims3: ThreeOutcomePrimitives, mu_S: Sequence[float], lam_S: float) -> DiagnosticVerdict:
    """Margin sum_q mu(q) log(q1(d)/q(d)) - lam k; positive means the milestone ray clears k.

    ``T_bound`` is a finite ray length T with gap at least k at utilities
    x(1) = x(0) = T / lam, x(d) = 0.
    """
    w = np.asarray(mu_S, dtype=float)
    qd = prims3.Q2[:, 2]
    mask = w > 0
    lhs = float(np.sum(w[mask] * np.log(prims3.psi / qd[mask])))
    margin = lhs - lam_S * prims3.k
    if margin <= 0:
        return DiagnosticVerdict(False, margin, None)
    a = float(np.sum(w[mask] * (1 - qd[mask]) / qd[mask]))
    return DiagnosticVerdict(True, margin, max(0.0, math.log(a / margin)))


# --- shirking ------------------------------------------------------------------------------------


@dataclass(frozen=True)
class ShirkPrimitives:
    p0: float
    p: float
    thetas: tuple[float, ...]
    k1: float
    k: float

    def __post_init__(self) -> None:
        if not 0.0 < self.p0 < 1.0 or not 0.0 < self.p < 1.0:
            raise DomainError("shirking and routine success probabilities must lie in (0, 1)")
        if any(not 0.0 < t < 1.0 for t in self.thetas):
            raise DomainError("innovation models must have full support")
        if not 0.0 < self.k1 <= self.k:
            raise DomainError(f"need 0 < k1 <= k, got k1={self.k1}, k={self.k}")


@dataclass(frozen=True)
class ShirkCapacity:
    value: float
    verdict: bool
    argmax_spread: float | None
    two_action_capacity: float


def _shirk_slack(sp: ShirkPrimitives, w: np.ndarray, lam: float, s: np.ndarray) -> np.ndarray:
    th = np.asarray(sp.thetas, dtype=float)
    m0 = _scaled_gaps(th, w, sp.p0, s) / lam - sp.k
    m1 = _scaled_gaps(th, w, sp.p, s) / lam - (sp.k - sp.k1)
    return np.minimum(m0, m1)


def shirking_capacity(sp: ShirkPrimitives, mu: Sequence[float], lam: float) -> ShirkCapacity:
    """sup over spreads of min{M0 - k, M1 - (k - k1)}; innovation is implementable iff it is >= 0."""
    w = np.asarray(mu, dtype=float)
    th = np.asarray(sp.thetas, dtype=float)
    if w.size != th.size:
        raise DomainError("posterior needs one weight per innovation model")
    kind = classify_intensity(lam)
    cap1 = binary_capacity(th, w, sp.p, lam).value
    if kind == "inf":
        return ShirkCapacity(-sp.k, False, None, cap1)
    if kind == "zero":
        value = _zero_lambda_slack(sp, float(w @ th) - sp.p0, float(w @ th) - sp.p)
        return ShirkCapacity(value, value >= 0.0, None, cap1)
    s, v, _ = scan_then_golden(lambda z: _shirk_slack(sp, w, lam, z), -FACE_HALF_WIDTH, FACE_HALF_WIDTH, FACE_SCAN_POINTS, 1e-10)
    p0_plus, p0_minus = gap_limits(th, w, sp.p0)
    p1_plus, p1_minus = gap_limits(th, w, sp.p)
    lim_plus = min(p0_plus / lam - sp.k, p1_plus / lam - (sp.k - sp.k1))
    lim_minus = min(p0_minus / lam - sp.k, p1_minus / lam - (sp.k - sp.k1))
    limit = max(lim_plus, lim_minus)
    interior = float(v)
    attained = interior > limit + ATTAIN_MARGIN
    value = max(interior, limit)
    return ShirkCapacity(value, value >= 0.0, s / lam if attained else None, cap1)


def _zero_lambda_slack(sp: ShirkPrimitives, d0: float, d1: float) -> float:
    """Expected-utility slack: sup over z of min{d0 z - k, d1 z - (k - k1)} with drifts d0, d1."""
    if d0 * d1 > 0:
        return math.inf
    if d0 == 0.0:
        return -sp.k
    if d1 == 0.0:
        return -(sp.k - sp.k1)
    # opposite slopes: the lower envelope peaks where the two lines cross
    z = sp.k1 / (d0 - d1)
    return d0 * z - sp.k


def shirk_node_choice(sp: ShirkPrimitives, mu: Sequence[float], lam: float, x: Sequence[float]) -> int:
    """Terminal action among shirk (0), routine (1), innovate (2); ties go to the higher code."""
    xa = np.asarray(x, dtype=float)
    w = np.asarray(mu, dtype=float)
    v0 = certainty_equivalent([1 - sp.p0, sp.p0], xa, lam)
    v1 = certainty_equivalent([1 - sp.p, sp.p], xa, lam) - sp.k1
    vals = [certainty_equivalent([1 - t, t], xa, lam) for t in sp.thetas]
    v2 = sum(wi * vi for wi, vi in zip(w, vals) if wi > 0) - sp.k
    best = max(v0, v1, v2)
    return max(a for a, v in ((0, v0), (1, v1), (2, v2)) if v >= best)
