"""Two-period state evolution and incentive capacity on binary outcomes.

Outcomes are indexed 0 (failure) and 1 (success). The safe action has the known
model q1 = Bernoulli(p); the innovative action is described by two candidate
models q_L = Bernoulli(theta_L) and q_H = Bernoulli(theta_H) with prior weight m
on q_H. A state is the posterior weight on q_H together with the intensity lambda.

The incentive gap of a contract is the innovative ARC value minus the safe
certainty equivalent; the capacity is its supremum over contracts. Since the gap
depends on the contract only through the spread zeta = x(1) - x(0), and since
g_q(z / lam; lam) = g_q(z; 1) / lam, every capacity is computed at lam = 1 on the
scaled spread s = lam * zeta and divided by lam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from robustpa._search import scan_then_golden
from robustpa.entropic import Roadmap, arc_value, certainty_equivalent, classify_intensity
from robustpa.errors import DomainError
from robustpa.wagemap import WageMap

SEARCH_HALF_WIDTH = 50.0
SCAN_POINTS = 4001
GOLDEN_TOL = 1e-10
ATTAIN_MARGIN = 1e-9
BISECT_TOL = 1e-6


@dataclass(frozen=True)
class DynamicPrimitives:
    p: float
    theta_L: float
    theta_H: float
    m: float
    k: float
    gamma: float
    A: float = 1.0
    delta: float = 1.0
    U0: float = 0.0
    lambda1: float = 0.1
    wage_map: WageMap = field(default_factory=WageMap)

    def __post_init__(self) -> None:
        if not (0.0 < self.theta_L < self.p < self.theta_H < 1.0):
            raise DomainError(
                f"need 0 < theta_L < p < theta_H < 1, got theta_L={self.theta_L}, p={self.p}, theta_H={self.theta_H}"
            )
        if not 0.0 < self.m < 1.0:
            raise DomainError(f"prior weight m must lie in (0, 1), got {self.m}")
        if not self.k > 0.0:
            raise DomainError(f"innovation cost k must be positive, got {self.k}")
        if not self.gamma > 0.0:
            raise DomainError(f"LLR scale gamma must be positive, got {self.gamma}")
        if not self.A >= 1.0:
            raise DomainError(f"scale-up multiplier A must be at least 1, got {self.A}")
        if not 0.0 < self.delta <= 1.0:
            raise DomainError(f"discount delta must lie in (0, 1], got {self.delta}")
        classify_intensity(self.lambda1)

    def replace(self, **changes) -> "DynamicPrimitives":
        return replace(self, **changes)

    @property
    def safe_model(self) -> np.ndarray:
        return np.array([1.0 - self.p, self.p])

    @property
    def thetas(self) -> np.ndarray:
        """Innovation success probabilities ordered (q_L, q_H)."""
        return np.array([self.theta_L, self.theta_H])

    def innovation_roadmap(self, m: float) -> Roadmap:
        return Roadmap([[1 - self.theta_L, self.theta_L], [1 - self.theta_H, self.theta_H]], [1 - m, m])


@dataclass(frozen=True)
class RobustnessState:
    """Posterior weight on q_H and the misspecification intensity."""

    m: float
    lam: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.m <= 1.0:
            raise DomainError(f"posterior weight must lie in [0, 1], got {self.m}")
        classify_intensity(self.lam)

    @property
    def weights(self) -> np.ndarray:
        return np.array([1.0 - self.m, self.m])


def bayes_update(prims: DynamicPrimitives, m_prior: float, y: int) -> float:
    """Posterior weight on q_H after one innovation outcome ``y``."""
    if not 0.0 < m_prior < 1.0:
        raise DomainError(f"prior weight must lie in (0, 1), got {m_prior}")
    lik_h, lik_l = (prims.theta_H, prims.theta_L) if y == 1 else (1 - prims.theta_H, 1 - prims.theta_L)
    return m_prior * lik_h / (m_prior * lik_h + (1 - m_prior) * lik_l)


def llr_update(prims: DynamicPrimitives, y: int) -> float:
    """Post-innovation intensity: best structured one-step log-likelihood deficit over gamma.

    A single observation is fitted perfectly by the unstructured maximum, so the
    deficit is -log of the best structured likelihood: theta_H after a success and
    1 - theta_L after a failure.
    """
    best = prims.theta_H if y == 1 else 1.0 - prims.theta_L
    return -math.log(best) / prims.gamma


def post_innovation_state(prims: DynamicPrimitives, y: int, m_prior: float | None = None) -> RobustnessState:
    m0 = prims.m if m_prior is None else m_prior
    return RobustnessState(bayes_update(prims, m0, y), llr_update(prims, y))


def _scaled_gaps(thetas: np.ndarray, weights: np.ndarray, p: float, s: np.ndarray) -> np.ndarray:
    """Incentive gap at lam = 1 on x = (0, s), vectorized over s."""
    s = np.asarray(s, dtype=float)

    def g(theta: float) -> np.ndarray:
        return -np.logaddexp(math.log1p(-theta), math.log(theta) - s)

    total = sum(w * g(t) for t, w in zip(thetas, weights) if w > 0.0)
    return total - g(p)


def gap_limits(thetas: Sequence[float], weights: Sequence[float], p: float) -> tuple[float, float]:
    """Limits of the lam = 1 gap as the spread goes to +inf and to -inf."""
    th = np.asarray(thetas, dtype=float)
    w = np.asarray(weights, dtype=float)
    mask = w > 0
    plus = float(np.sum(w[mask] * np.log((1 - p) / (1 - th[mask]))))
    minus = float(np.sum(w[mask] * np.log(p / th[mask])))
    return plus, minus


@dataclass(frozen=True)
class CapacityResult:
    """Supremum of the incentive gap over spreads.

    ``argmax_spread`` is the maximizing spread zeta when the supremum is attained
    at a finite contract and ``None`` when it is only approached in a limit.
    """

    value: float
    attained: bool
    argmax_spread: float | None
    limit_plus: float
    limit_minus: float
    interior: float | None


def binary_capacity(thetas: Sequence[float], weights: Sequence[float], p: float, lam: float) -> CapacityResult:
    """Capacity for an arbitrary finite belief over Bernoulli innovation models."""
    th = np.asarray(thetas, dtype=float)
    w = np.asarray(weights, dtype=float)
    if np.any(th <= 0) or np.any(th >= 1) or not 0 < p < 1:
        raise DomainError("success probabilities must lie strictly inside (0, 1)")
    kind = classify_intensity(lam)
    if kind == "zero":
        drift = float(w @ th) - p
        if drift == 0.0:
            return CapacityResult(0.0, True, 0.0, 0.0, 0.0, 0.0)
        up = math.inf if drift > 0 else -math.inf
        return CapacityResult(math.inf, False, None, up, -up, None)
    if kind == "inf":
        return CapacityResult(0.0, True, 0.0, 0.0, 0.0, 0.0)

    plus, minus = gap_limits(th, w, p)
    best_s, best_v, _ = scan_then_golden(
        lambda z: _scaled_gaps(th, w, p, z), -SEARCH_HALF_WIDTH, SEARCH_HALF_WIDTH, SCAN_POINTS, GOLDEN_TOL
    )
    limit = max(plus, minus)
    attained = best_v > limit + ATTAIN_MARGIN
    value = max(best_v, limit)
    return CapacityResult(
        value=value / lam,
        attained=attained,
        argmax_spread=best_s / lam if attained else None,
        limit_plus=plus / lam,
        limit_minus=minus / lam,
        interior=best_v / lam,
    )


def capacity_bounds(thetas: Sequence[float], weights: Sequence[float], p: float, lam: float) -> tuple[float, float]:
    """Cheap bracket for the capacity at finite lam.

    Lower: the larger boundary limit. Upper: the prior average of point-mass
    capacities, which are themselves the larger boundary limit of each model.
    """
    th = np.asarray(thetas, dtype=float)
    w = np.asarray(weights, dtype=float)
    plus, minus = gap_limits(th, w, p)
    point = np.maximum(np.log(p / th), np.log((1 - p) / (1 - th)))
    return max(plus, minus) / lam, float(w @ point) / lam


def incentive_gap(state: RobustnessState, prims: DynamicPrimitives, x: Sequence[float]) -> float:
    """Innovative ARC value (before cost) minus the safe certainty equivalent."""
    xa = np.asarray(x, dtype=float)
    if xa.shape != (2,):
        raise DomainError("incentive_gap is defined on binary outcome profiles")
    road = _belief_roadmap(prims, state.m)
    return arc_value(road, xa, state.lam) - certainty_equivalent(prims.safe_model, xa, state.lam)


def _belief_roadmap(prims: DynamicPrimitives, m: float) -> Roadmap:
    if m <= 0.0:
        return Roadmap.singleton([1 - prims.theta_L, prims.theta_L])
    if m >= 1.0:
        return Roadmap.singleton([1 - prims.theta_H, prims.theta_H])
    return prims.innovation_roadmap(m)


def incentive_capacity(state: RobustnessState, prims: DynamicPrimitives) -> CapacityResult:
    return binary_capacity(prims.thetas, state.weights, prims.p, state.lam)


def lambda_star(prims: DynamicPrimitives) -> float:
    """Largest intensity at which a point mass on q_H still supports gap k."""
    return math.log((1 - prims.p) / (1 - prims.theta_H)) / prims.k


@dataclass(frozen=True)
class TrapReport:
    lambda_star: float
    lambda2_success: float
    posterior_success: float
    capacity: CapacityResult
    verdict: str
    closed_form: bool
    forms_agree: bool
    theta_L_bar: float | None

    @property
    def trap(self) -> bool | None:
        """True or False away from the knife-edge lambda2(1) = lambda*, None on it."""
        if self.verdict == "boundary":
            return None
        return self.verdict == "trap"


def _is_trapped(prims: DynamicPrimitives) -> bool:
    state = post_innovation_state(prims, 1)
    cap = incentive_capacity(state, prims)
    return cap.value < prims.k or (cap.value == prims.k and not cap.attained)


def trap_check(prims: DynamicPrimitives) -> TrapReport:
    """Post-success capacity against the innovation cost, plus a theta_L certificate.

    The verdict is ``"trap"`` when the post-success capacity falls short of k,
    ``"no-trap"`` otherwise, and ``"boundary"`` when lambda2(1) equals lambda*
    to rounding, where no verdict is issued.
    """
    lstar = lambda_star(prims)
    state = post_innovation_state(prims, 1)
    cap = incentive_capacity(state, prims)
    closed = prims.k * math.log(1 / prims.theta_H) > prims.gamma * math.log((1 - prims.p) / (1 - prims.theta_H))
    above = state.lam > lstar
    if abs(state.lam - lstar) <= 1e-12 * max(1.0, lstar):
        verdict = "boundary"
    else:
        verdict = "trap" if _is_trapped(prims) else "no-trap"
    theta_bar = _theta_L_certificate(prims) if above and verdict != "boundary" else None
    return TrapReport(
        lambda_star=lstar,
        lambda2_success=state.lam,
        posterior_success=state.m,
        capacity=cap,
        verdict=verdict,
        closed_form=closed,
        forms_agree=closed == above,
        theta_L_bar=theta_bar,
    )


def _theta_L_certificate(prims: DynamicPrimitives) -> float:
    """Largest theta_L, to BISECT_TOL, below which the trap holds with the other primitives fixed."""
    hi = prims.p * (1 - 1e-9)
    if _is_trapped(prims.replace(theta_L=hi)):
        return prims.p
    lo = 1e-12
    if not _is_trapped(prims.replace(theta_L=lo)):
        return 0.0
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if _is_trapped(prims.replace(theta_L=mid)):
            lo = mid
        else:
            hi = mid
    return lo
