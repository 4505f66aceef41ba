"""Infinite-horizon learning: simulated paths, the LLR statistic, value recursions and the speed limit.

A global structured model assigns an outcome distribution to every action; the
agent holds a finite set of them with a full-support prior. Actions are coded
1 (safe) and 2 (innovate) as elsewhere in the package and are stored at index
a - 1. A private history enters the agent's state only through its count table
``counts[a - 1, y]``, which is what the simulation and the recursions carry.

Randomness: each path seed owns one counter-based Philox stream
(``numpy.random.Philox``). All of a path's uniforms are drawn up front, and the
outcome at date t is the inverse-CDF image of the t-th uniform under the true
distribution of the action taken, so paths under different policies share their
random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Hashable, Sequence

import numpy as np

from robustpa.dynamics_state import DynamicPrimitives, binary_capacity
from robustpa.entropic import certainty_equivalents, classify_intensity, kl_divergence, validate_model
from robustpa.errors import DomainError

SAFE = 1
INNOVATE = 2
BEST_FIT_TOL = 1e-12


# --- primitives ----------------------------------------------------------------------------------


@dataclass(frozen=True)
class GlobalModelSet:
    """``models[i, a - 1]`` is model i's outcome distribution under action a; ``costs[a - 1]`` is c(a)."""

    models: np.ndarray
    prior: np.ndarray
    costs: np.ndarray

    def __post_init__(self) -> None:
        models = np.asarray(self.models, dtype=float)
        if models.ndim != 3:
            raise DomainError(f"global models need shape (models, actions, outcomes), got {models.shape}")
        for row in models.reshape(-1, models.shape[2]):
            validate_model(row)
        prior = validate_model(self.prior) if np.size(self.prior) > 1 else np.ones(1)
        costs = np.asarray(self.costs, dtype=float)
        if prior.size != models.shape[0] or costs.shape != (models.shape[1],):
            raise DomainError("prior must have one weight per model and costs one entry per action")
        for arr in (models, prior, costs):
            arr.setflags(write=False)
        object.__setattr__(self, "models", models)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "costs", costs)

    @property
    def n_models(self) -> int:
        return self.models.shape[0]

    @property
    def n_actions(self) -> int:
        return self.models.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.models.shape[2]

    @classmethod
    def innovation(cls, p: float, thetas: Sequence[float], prior: Sequence[float], k: float) -> "GlobalModelSet":
        """Known safe arm Bernoulli(p) shared by every model; innovation Bernoulli(theta_i) per model."""
        rows = [[[1 - p, p], [1 - t, t]] for t in thetas]
        return cls(np.array(rows), np.asarray(prior, dtype=float), np.array([0.0, k]))

    @classmethod
    def from_primitives(cls, prims: DynamicPrimitives) -> "GlobalModelSet":
        """Models ordered (q_L, q_H) with prior (1 - m, m)."""
        return cls.innovation(prims.p, [prims.theta_L, prims.theta_H], [1 - prims.m, prims.m], prims.k)

    def log_models(self) -> np.ndarray:
        return np.log(self.models)


@dataclass(frozen=True)
class TrueProcess:
    """``p_star[a - 1]`` is the true outcome distribution under action a."""

    p_star: np.ndarray

    def __post_init__(self) -> None:
        arr = np.atleast_2d(np.asarray(self.p_star, dtype=float))
        for row in arr:
            validate_model(row)
        arr.setflags(write=False)
        object.__setattr__(self, "p_star", arr)

    @classmethod
    def binary(cls, p_safe: float, p_innov: float) -> "TrueProcess":
        return cls(np.array([[1 - p_safe, p_safe], [1 - p_innov, p_innov]]))


@dataclass(frozen=True)
class LambdaRule:
    """Maps (LLR, date) to an intensity.

    ``sophisticated``: LLR / (gamma t). ``lenient`` and ``demanding`` multiply that
    by ``envelope(t)``, which defaults to 1/sqrt(t) and sqrt(t) respectively.
    """

    kind: str = "sophisticated"
    gamma: float = 1.0
    envelope: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("sophisticated", "lenient", "demanding"):
            raise DomainError(f"unknown lambda rule {self.kind!r}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise DomainError(f"gamma must be positive and finite, got {self.gamma}")

    def __call__(self, llr, t):
        base = np.asarray(llr, dtype=float) / (self.gamma * np.asarray(t, dtype=float))
        if self.kind == "sophisticated":
            return base
        env = self.envelope
        if env is None:
            env = (lambda s: 1.0 / np.sqrt(s)) if self.kind == "lenient" else np.sqrt
        return base * env(np.asarray(t, dtype=float))


# --- sufficient statistics -----------------------------------------------------------------------


def counts_from_history(history: Sequence[tuple[int, int]], n_actions: int, n_outcomes: int) -> np.ndarray:
    counts = np.zeros((n_actions, n_outcomes), dtype=np.int64)
    for a, y in history:
        if not (1 <= a <= n_actions and 0 <= y < n_outcomes):
            raise DomainError(f"history step {(a, y)} is outside the action or outcome range")
        counts[a - 1, y] += 1
    return counts


def _xlogx_rows(counts: np.ndarray) -> np.ndarray:
    """sum_y N log(N / N_a) summed over actions (0 log 0 = 0); trailing axes (actions, outcomes)."""
    n = counts.astype(float)
    tot = n.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(n > 0, n * (np.log(n) - np.log(np.where(tot > 0, tot, 1.0))), 0.0)
    return terms.sum(axis=(-1, -2))


def structured_logliks(models: GlobalModelSet, counts: np.ndarray) -> np.ndarray:
    """log-likelihood of each model; ``counts`` may carry leading batch axes."""
    logq = models.log_models().reshape(models.n_models, -1)
    flat = np.asarray(counts, dtype=float).reshape(*np.shape(counts)[:-2], -1)
    return flat @ logq.T


def llr_from_counts(models: GlobalModelSet, counts: np.ndarray, actions: Sequence[int] | None = None) -> np.ndarray:
    """LLR of the best structured model against the per-action empirical MLE."""
    counts = np.asarray(counts)
    if actions is not None:
        mask = np.zeros(models.n_actions, dtype=bool)
        mask[[a - 1 for a in actions]] = True
        counts = counts * mask[:, None]
    llr = _xlogx_rows(counts) - structured_logliks(models, counts).max(axis=-1)
    return np.maximum(llr, 0.0)


def llr_statistic(history: Sequence[tuple[int, int]], models: GlobalModelSet, actions: Sequence[int] | None = None) -> float:
    """-log of the best structured likelihood over the unstructured maximum; empty history gives 0.

    ``actions`` restricts the statistic to steps taken with those actions.
    """
    counts = counts_from_history(history, models.n_actions, models.n_outcomes)
    return float(llr_from_counts(models, counts, actions))


def posterior_from_counts(models: GlobalModelSet, counts: np.ndarray) -> np.ndarray:
    logp = np.log(models.prior) + structured_logliks(models, counts)
    logp = logp - logp.max(axis=-1, keepdims=True)
    w = np.exp(logp)
    return w / w.sum(axis=-1, keepdims=True)


# --- RNG -----------------------------------------------------------------------------------------


def path_uniforms(seed: int, T: int) -> np.ndarray:
    """The T uniforms of path ``seed``: first T draws of Generator(Philox(seed)).random."""
    return np.random.Generator(np.random.Philox(int(seed))).random(int(T))


def _outcomes(true: TrueProcess, actions: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(true.p_star, axis=1)[:, :-1]
    return np.sum(u[:, None] >= cum[actions - 1], axis=1)


# --- policies ------------------------------------------------------------------------------------


@dataclass
class PolicyContext:
    """What a policy sees at date ``t`` for every path in the batch."""

    t: int
    counts: np.ndarray  # (S, A, n)
    posterior: np.ndarray  # (S, K)
    lam: np.ndarray  # (S,)


Policy = Callable[[PolicyContext], np.ndarray]


def constant_policy(action: int) -> Policy:
    def policy(ctx: PolicyContext) -> np.ndarray:
        return np.full(ctx.lam.shape, action, dtype=np.int64)

    return policy


class CapacityGate:
    """Innovate iff the capacity at the current state covers k.

    Cheap closed-form brackets decide most dates; the exact capacity is computed
    only inside the bracket and cached by the innovation counts, which pin down the
    posterior. A capacity equal to k that is only approached in a limit counts as
    covering k, a measure-zero event on simulated paths.
    """

    def __init__(self, models: GlobalModelSet):
        safe = models.models[:, 0, :]
        if models.n_outcomes != 2 or models.n_actions != 2 or np.ptp(safe[:, 1]) > 0:
            raise DomainError("the capacity gate needs binary outcomes and a safe arm shared by every model")
        self.p = float(safe[0, 1])
        self.thetas = models.models[:, 1, 1].copy()
        self.k = float(models.costs[1])
        self._plus = np.log((1 - self.p) / (1 - self.thetas))
        self._minus = np.log(self.p / self.thetas)
        self._cache: dict[tuple, float] = {}
        self.exact_calls = 0

    def capacity_at_unit(self, w: np.ndarray) -> float:
        return binary_capacity(self.thetas, w, self.p, 1.0).value

    def __call__(self, ctx: PolicyContext) -> np.ndarray:
        w = ctx.posterior
        lam = ctx.lam
        lower = np.maximum(w @ self._plus, w @ self._minus)
        upper = w @ np.maximum(self._plus, self._minus)
        need = self.k * lam
        innovate = need <= lower
        unsure = ~innovate & (need <= upper)
        for s in np.flatnonzero(unsure):
            key = tuple(ctx.counts[s, 1])
            cap = self._cache.get(key)
            if cap is None:
                self.exact_calls += 1
                cap = self.capacity_at_unit(w[s])
                self._cache[key] = cap
            innovate[s] = cap >= need[s]
        # lambda = 0 leaves only the drift: capacity is infinite unless the mean matches p
        zero = lam < 1e-10
        if zero.any():
            drift = w[zero] @ self.thetas - self.p
            innovate[zero] = drift != 0.0
        return np.where(innovate, INNOVATE, SAFE)


# --- simulation ----------------------------------------------------------------------------------


@dataclass
class PathBatch:
    """Trajectories for a batch of seeds; arrays are indexed (recorded date, seed)."""

    seeds: list[int]
    dates: np.ndarray
    actions: np.ndarray
    outcomes: np.ndarray
    posterior: np.ndarray
    lam: np.ndarray
    alpha: np.ndarray
    final_counts: np.ndarray
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    def path(self, i: int) -> "PathBatch":
        sl = slice(i, i + 1)
        return PathBatch(
            [self.seeds[i]],
            self.dates,
            self.actions[:, sl],
            self.outcomes[:, sl],
            self.posterior[:, sl],
            self.lam[:, sl],
            self.alpha[:, sl],
            self.final_counts[sl],
            {t: c[sl] for t, c in self.snapshots.items()},
        )


def simulate_paths(
    models: GlobalModelSet,
    true: TrueProcess,
    rule: LambdaRule,
    T: int,
    seeds: Sequence[int],
    policy: Policy,
    record_stride: int = 1,
    snapshot_dates: Sequence[int] = (),
    llr_actions: Sequence[int] | None = None,
) -> PathBatch:
    """Simulate T dates for every seed at once.

    At date t the agent holds the state built from the t - 1 earlier steps:
    Bayes posterior over the global models and lambda_t = rule(LLR, t). Rows are
    recorded at dates 1, 1 + stride, ...; ``snapshot_dates`` keep the count table
    at the start of those dates.
    """
    if T < 1:
        raise DomainError(f"horizon must be at least 1, got {T}")
    if true.p_star.shape != (models.n_actions, models.n_outcomes):
        raise DomainError("true process must give one distribution per action on the same outcomes")
    seeds = [int(s) for s in seeds]
    S = len(seeds)
    u = np.stack([path_uniforms(s, T) for s in seeds], axis=1)
    counts = np.zeros((S, models.n_actions, models.n_outcomes), dtype=np.int64)
    logq = models.log_models()
    loglik = np.zeros((S, models.n_models))
    logprior = np.log(models.prior)
    mask = None
    if llr_actions is not None:
        mask = np.zeros(models.n_actions, dtype=bool)
        mask[[a - 1 for a in llr_actions]] = True
    dates = np.arange(1, T + 1, record_stride)
    n_rec = dates.size
    rec_a = np.zeros((n_rec, S), dtype=np.int8)
    rec_y = np.zeros((n_rec, S), dtype=np.int8)
    rec_mu = np.zeros((n_rec, S, models.n_models))
    rec_lam = np.zeros((n_rec, S))
    rec_alpha = np.zeros((n_rec, S))
    snaps = {int(t): None for t in snapshot_dates}
    innov = np.zeros(S)
    rows = np.arange(S)
    r = 0
    for t in range(1, T + 1):
        if t in snaps:
            snaps[t] = counts.copy()
        lp = logprior + loglik
        lp = lp - lp.max(axis=1, keepdims=True)
        post = np.exp(lp)
        post /= post.sum(axis=1, keepdims=True)
        c_llr = counts if mask is None else counts * mask[:, None]
        struct = loglik if mask is None else c_llr.reshape(S, -1) @ logq.reshape(models.n_models, -1).T
        llr = np.maximum(_xlogx_rows(c_llr) - struct.max(axis=1), 0.0)
        lam = rule(llr, t)
        a = np.asarray(policy(PolicyContext(t, counts, post, lam)), dtype=np.int64)
        y = _outcomes(true, a, u[t - 1])
        counts[rows, a - 1, y] += 1
        loglik += logq[:, a - 1, y].T
        innov += a == INNOVATE
        if r < n_rec and dates[r] == t:
            rec_a[r], rec_y[r], rec_mu[r], rec_lam[r] = a, y, post, lam
            rec_alpha[r] = innov / t
            r += 1
    snapshots = {t: c for t, c in snaps.items() if c is not None}
    return PathBatch(seeds, dates, rec_a, rec_y, rec_mu, rec_lam, rec_alpha, counts.copy(), snapshots)


def simulate_path(models, true, rule, T, seed, policy, **kw) -> PathBatch:
    """Single-seed convenience wrapper around :func:`simulate_paths`."""
    return simulate_paths(models, true, rule, T, [seed], policy, **kw)


# --- value recursions ----------------------------------------------------------------------------


@dataclass(frozen=True)
class InfiniteContract:
    """Utility payments ``payment(t, key)`` indexed by a summary ``key`` of the public history.

    ``advance(key, y)`` updates the summary after outcome y. A contract must declare a
    finite sup-norm ``bound``; payments beyond it are rejected during evaluation.
    """

    payment: Callable[[int, Hashable], np.ndarray]
    bound: float
    advance: Callable[[Hashable, int], Hashable] = lambda key, y: None
    root_key: Hashable = None

    def __post_init__(self) -> None:
        if not (self.bound >= 0 and math.isfinite(self.bound)):
            raise DomainError(f"an infinite-horizon contract needs a finite bound, got {self.bound}")

    @classmethod
    def stationary(cls, x: Sequence[float], bound: float | None = None) -> "InfiniteContract":
        xa = np.asarray(x, dtype=float)
        b = float(np.max(np.abs(xa))) if bound is None else float(bound)
        return cls(lambda t, key: xa, b)

    def at(self, t: int, key: Hashable) -> np.ndarray:
        x = np.asarray(self.payment(t, key), dtype=float)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > self.bound * (1 + 1e-12):
            raise DomainError(f"contract payment at date {t} exceeds the declared bound {self.bound}")
        return x


class LearningStates:
    """Agent states from counts: Bayes posterior and lambda_t = rule(LLR, t)."""

    def __init__(self, models: GlobalModelSet, rule: LambdaRule, llr_actions: Sequence[int] | None = None):
        self.models, self.rule, self.llr_actions = models, rule, llr_actions
        self.frozen = False

    def __call__(self, counts: np.ndarray, t: int) -> tuple[np.ndarray, float]:
        post = posterior_from_counts(self.models, counts)
        llr = float(llr_from_counts(self.models, counts, self.llr_actions))
        return post, float(self.rule(llr, t))


class FrozenStates:
    """The same state at every history."""

    def __init__(self, posterior: Sequence[float], lam: float):
        self.posterior = np.asarray(posterior, dtype=float)
        self.lam = float(lam)
        classify_intensity(self.lam)
        self.frozen = True

    def __call__(self, counts: np.ndarray, t: int) -> tuple[np.ndarray, float]:
        return self.posterior, self.lam


def recursion_bound(delta: float, xbar: float, k: float) -> float:
    """B = (xbar + k) / (1 - delta), the sup-norm cap on every continuation value."""
    return (xbar + k) / (1.0 - delta)


def truncation_bound(delta: float, xbar: float, k: float, T: int, t: int) -> float:
    """Cap on |W_t^{T'} - W_t^T| for T' >= T: delta^(T + 1 - t) * B."""
    return delta ** (T + 1 - t) * recursion_bound(delta, xbar, k)


@dataclass
class RecursionResult:
    value: float
    action: int
    nodes: int
    delta: float
    T: int
    root_t: int
    bound_B: float


def value_recursion(
    contract: InfiniteContract,
    states,
    models: GlobalModelSet,
    delta: float,
    T: int,
    root_t: int = 1,
    root_counts: np.ndarray | None = None,
    root_key: Hashable = None,
) -> RecursionResult:
    """Backward induction from W_{T+1} = 0 over every private continuation of the root.

    Histories are merged when they share the date, the count table and the public
    key, which is exact because the state and the payments depend on nothing else.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError(f"discount must lie in (0, 1), got {delta}")
    if T < root_t - 1:
        raise DomainError("truncation date precedes the root")
    base = np.zeros((models.n_actions, models.n_outcomes), dtype=np.int64) if root_counts is None else np.asarray(root_counts, dtype=np.int64)
    key0 = contract.root_key if root_key is None else root_key
    A, n = models.n_actions, models.n_outcomes
    memo: dict = {}
    frozen = getattr(states, "frozen", False)

    def solve(t: int, extra: tuple, key: Hashable) -> tuple[float, int]:
        if t > T:
            return 0.0, 0
        mk = (t, key) if frozen else (t, extra, key)
        hit = memo.get(mk)
        if hit is not None:
            return hit
        counts = base + np.asarray(extra, dtype=np.int64).reshape(A, n)
        post, lam = states(counts, t)
        x = contract.at(t, key)
        best, best_a = -math.inf, 0
        for a in range(A):
            cont = np.empty(n)
            for y in range(n):
                nxt = list(extra)
                nxt[a * n + y] += 1
                cont[y] = solve(t + 1, tuple(nxt), contract.advance(key, y))[0]
            z = x + delta * cont
            val = float(post @ certainty_equivalents(models.models[:, a, :], z, lam)) - models.costs[a]
            # ties go to the higher-cost action, i.e. innovation
            if val >= best:
                best, best_a = val, a + 1
        memo[mk] = (best, best_a)
        return best, best_a

    v, a = solve(root_t, (0,) * (A * n), key0)
    B = recursion_bound(delta, contract.bound, float(np.max(models.costs)))
    return RecursionResult(v, a, len(memo), delta, T, root_t, B)


def limit_recursion(
    posterior: Sequence[float],
    lam: float,
    contract: InfiniteContract,
    models: GlobalModelSet,
    delta: float,
    T: int,
    root_t: int = 1,
    root_key: Hashable = None,
) -> RecursionResult:
    """The same recursion with the state frozen at (posterior, lam)."""
    return value_recursion(contract, FrozenStates(posterior, lam), models, delta, T, root_t, None, root_key)


# --- local stability bounds ----------------------------------------------------------------------


def _increments(A: int, n: int, N: int):
    """All count increments reachable within N further steps."""
    cells = A * n
    for total in range(N + 1):
        for combo in product(range(total + 1), repeat=cells):
            if sum(combo) == total:
                yield np.asarray(combo, dtype=np.int64).reshape(A, n), total


def likelihood_ratio_cap(models: GlobalModelSet) -> float:
    """K = max over models, actions, outcomes of q(y) / q'(y)."""
    m = models.models
    return float(np.max(m[:, None, :, :] / m[None, :, :, :]))


def min_probability(models: GlobalModelSet) -> float:
    return float(np.min(models.models))


def posterior_local_bound(models: GlobalModelSet, mu_star: float, N: int) -> float:
    """Cap on the L1 distance to the point mass within N steps: 2 K^N (1 - mu) / mu."""
    return 2.0 * likelihood_ratio_cap(models) ** N * (1.0 - mu_star) / mu_star


def llr_local_bound(models: GlobalModelSet, t: int, N: int) -> float:
    """Cap on |LLR(h~)/|h~| - LLR(h_t)/t| within N steps."""
    lq = math.log(1.0 / min_probability(models))
    return (N * lq + N * (1.0 + math.log(t + N))) / t + lq * N * (t + N) / t**2


@dataclass
class LocalDeviation:
    t: int
    mu_deviation: float
    mu_bound: float
    llr_deviation: float
    llr_bound: float


def local_deviations(models: GlobalModelSet, counts: np.ndarray, t: int, N: int, best_fit: int) -> LocalDeviation:
    """Largest posterior and normalized-LLR moves over all N-step continuations of a history."""
    counts = np.asarray(counts, dtype=np.int64)
    mu_t = posterior_from_counts(models, counts)[best_fit]
    r_t = float(llr_from_counts(models, counts)) / t
    mu_dev = 0.0
    llr_dev = 0.0
    for inc, j in _increments(models.n_actions, models.n_outcomes, N):
        c = counts + inc
        mu_dev = max(mu_dev, 2.0 * (1.0 - posterior_from_counts(models, c)[best_fit]))
        llr_dev = max(llr_dev, abs(float(llr_from_counts(models, c)) / (t + j) - r_t))
    return LocalDeviation(t, mu_dev, posterior_local_bound(models, mu_t, N), llr_dev, llr_local_bound(models, t, N))


# --- speed limit ---------------------------------------------------------------------------------


@dataclass
class SpeedLimitReport:
    D_star: float
    best_fit: list[str]
    lambda_bar_H: float
    lambda_bar_L: float
    alpha_star: float
    correctly_specified: bool


def speed_limit(prims: DynamicPrimitives, true: TrueProcess) -> SpeedLimitReport:
    """Best-fit discrepancy D*, the contractibility thresholds and alpha* = gamma / D* * max threshold."""
    p_star = true.p_star[1] if true.p_star.shape[0] > 1 else true.p_star[0]
    kls = {
        "q_L": kl_divergence(p_star, [1 - prims.theta_L, prims.theta_L]),
        "q_H": kl_divergence(p_star, [1 - prims.theta_H, prims.theta_H]),
    }
    d_star = min(kls.values())
    best = [name for name, v in kls.items() if v <= d_star + BEST_FIT_TOL]
    lam_h = math.log((1 - prims.p) / (1 - prims.theta_H)) / prims.k
    lam_l = math.log(prims.p / prims.theta_L) / prims.k
    thresholds = {"q_H": lam_h, "q_L": lam_l}
    if d_star <= BEST_FIT_TOL:
        return SpeedLimitReport(d_star, best, lam_h, lam_l, math.inf, True)
    alpha = prims.gamma / d_star * max(thresholds[b] for b in best)
    return SpeedLimitReport(d_star, best, lam_h, lam_l, alpha, False)


@dataclass
class CycleReport:
    alpha_star: float
    slack: float
    final_alpha: np.ndarray
    n_innovate: np.ndarray
    n_safe: np.ndarray
    final_lambda: np.ndarray
    final_posterior: np.ndarray
    exact_capacity_calls: int
    batch: PathBatch

    @property
    def max_alpha(self) -> float:
        return float(np.max(self.final_alpha))

    @property
    def within_limit(self) -> bool:
        return bool(np.all(self.final_alpha <= self.alpha_star + self.slack))


def cycle_experiment(
    prims: DynamicPrimitives,
    true: TrueProcess,
    T: int,
    seeds: Sequence[int],
    slack: float = 0.05,
    record_stride: int = 100,
) -> CycleReport:
    """Capacity-gated paths: innovate iff C(mu_t, lambda_t) >= k, otherwise play safe.

    The gate is a constructive stand-in for equilibrium paths on which innovation
    recurs; results probe the speed limit rather than verify it.
    """
    models = GlobalModelSet.from_primitives(prims)
    gate = CapacityGate(models)
    batch = simulate_paths(models, true, LambdaRule("sophisticated", prims.gamma), T, seeds, gate, record_stride)
    n_innov = batch.final_counts[:, 1, :].sum(axis=1)
    n_safe = batch.final_counts[:, 0, :].sum(axis=1)
    final_post = posterior_from_counts(models, batch.final_counts)
    final_llr = llr_from_counts(models, batch.final_counts)
    final_lam = LambdaRule("sophisticated", prims.gamma)(final_llr, T + 1)
    return CycleReport(
        alpha_star=speed_limit(prims, true).alpha_star,
        slack=slack,
        final_alpha=n_innov / T,
        n_innovate=n_innov,
        n_safe=n_safe,
        final_lambda=final_lam,
        final_posterior=final_post,
        exact_capacity_calls=gate.exact_calls,
        batch=batch,
    )


# --- bridge check --------------------------------------------------------------------------------


@dataclass
class BridgeRoot:
    t: int
    mean_gap: float
    gaps: np.ndarray
    deviations: list[LocalDeviation]


def bridge_check(
    prims: DynamicPrimitives,
    true: TrueProcess,
    contract: InfiniteContract,
    delta: float,
    roots: Sequence[int] = (100, 1000, 10000),
    seeds: Sequence[int] = tuple(range(16)),
    horizon: int = 10,
    depth: int = 5,
) -> list[BridgeRoot]:
    """|W_t - W_t^inf| at roots of always-innovate paths, with the frozen limit state.

    Both recursions are truncated ``horizon`` dates past the root. The limit state is
    the point mass on the best fit and D*/gamma; local posterior and LLR moves are
    measured over ``depth``-step continuations and compared with their caps.
    """
    models = GlobalModelSet.from_primitives(prims)
    rule = LambdaRule("sophisticated", prims.gamma)
    sl = speed_limit(prims, true)
    if len(sl.best_fit) != 1:
        raise DomainError("the bridge check needs a unique best-fitting model")
    best = 1 if sl.best_fit[0] == "q_H" else 0
    point = np.zeros(2)
    point[best] = 1.0
    lam_inf = sl.D_star / prims.gamma
    roots = sorted(int(t) for t in roots)
    batch = simulate_paths(
        models, true, rule, roots[-1], seeds, constant_policy(INNOVATE), record_stride=roots[-1], snapshot_dates=roots
    )
    states = LearningStates(models, rule)
    out = []
    for t in roots:
        gaps = []
        devs = []
        for s_idx in range(len(batch.seeds)):
            c = batch.snapshots[t][s_idx]
            w = value_recursion(contract, states, models, delta, t + horizon - 1, t, c).value
            w_inf = limit_recursion(point, lam_inf, contract, models, delta, t + horizon - 1, t).value
            gaps.append(abs(w - w_inf))
            devs.append(local_deviations(models, c, t, depth, best))
        g = np.asarray(gaps)
        out.append(BridgeRoot(t, float(g.mean()), g, devs))
    return out
