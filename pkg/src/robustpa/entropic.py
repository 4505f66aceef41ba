"""Entropic certainty equivalents, tilted beliefs and ARC aggregation.

Everything here is a pure function of numpy arrays. A model is a strictly positive
probability vector over a finite outcome set; a utility profile is a finite real
vector on the same set. The robustness intensity ``lam`` is a float in [0, inf];
the endpoints 0 and ``math.inf`` are evaluated by their limit formulas, and so are
finite values below ``LAMBDA_ZERO_THRESHOLD`` or above ``LAMBDA_INF_THRESHOLD``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from robustpa.errors import DomainError, UnsupportedEndpointError

LAMBDA_ZERO_THRESHOLD = 1e-10
LAMBDA_INF_THRESHOLD = 1e10
PROB_TOL = 1e-12


def validate_model(q: Sequence[float] | np.ndarray, tol: float = PROB_TOL) -> np.ndarray:
    """Return ``q`` as a float array after checking full support and unit mass.

    Mass errors up to ``tol`` are removed by renormalization.
    """
    arr = np.asarray(q, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise DomainError(f"a model needs at least two outcomes, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"model must have strictly positive entries, got {arr.tolist()}")
    total = float(arr.sum())
    if abs(total - 1.0) > tol:
        raise DomainError(f"model probabilities sum to {total!r}, not 1")
    return arr / total


def validate_profile(x: Sequence[float] | np.ndarray, n: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"utility profile must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"utility profile has non-finite entries: {arr.tolist()}")
    if n is not None and arr.size != n:
        raise DomainError(f"utility profile has {arr.size} entries, expected {n}")
    return arr


def classify_intensity(lam: float) -> str:
    """Return ``"zero"``, ``"finite"`` or ``"inf"`` after applying the endpoint thresholds."""
    lam = float(lam)
    if math.isnan(lam) or lam < 0.0:
        raise DomainError(f"robustness intensity must be nonnegative, got {lam!r}")
    if lam < LAMBDA_ZERO_THRESHOLD:
        return "zero"
    if lam > LAMBDA_INF_THRESHOLD:
        return "inf"
    return "finite"


def _finite_lambda(lam: float, what: str) -> float:
    kind = classify_intensity(lam)
    if kind != "finite":
        raise UnsupportedEndpointError(f"{what} is defined only for finite positive lambda, got {lam!r}")
    return float(lam)


def _log_mgf(models: np.ndarray, x: np.ndarray, lam: float) -> np.ndarray:
    """log sum_y q(y) exp(-lam (x(y) - min x)) for each row of ``models``; always <= 0."""
    shifted = x - x.min()
    # log1p/expm1 keeps precision when lam * shifted is tiny
    return np.log1p(models @ np.expm1(-lam * shifted))


def certainty_equivalents(models: np.ndarray, x: np.ndarray, lam: float) -> np.ndarray:
    """Vectorized certainty equivalent for each row of a (k, n) model array."""
    kind = classify_intensity(lam)
    if kind == "zero":
        return models @ x
    if kind == "inf":
        return np.full(models.shape[0], x.min())
    return x.min() - _log_mgf(models, x, lam) / lam


def certainty_equivalent(q: Sequence[float], x: Sequence[float], lam: float) -> float:
    """Entropic certainty equivalent g_q(x; lam) = -(1/lam) log E_q exp(-lam x).

    Equals E_q x at lam = 0 and min x at lam = inf.
    """
    qa = validate_model(q)
    xa = validate_profile(x, qa.size)
    return float(certainty_equivalents(qa[None, :], xa, lam)[0])


def tilted_belief(q: Sequence[float], x: Sequence[float], lam: float) -> np.ndarray:
    """Worst-case distortion of ``q``: weights proportional to q(y) exp(-lam x(y))."""
    qa = validate_model(q)
    xa = validate_profile(x, qa.size)
    lam = _finite_lambda(lam, "tilted_belief")
    return _tilt_rows(qa[None, :], xa, lam)[0]


def _tilt_rows(models: np.ndarray, x: np.ndarray, lam: float) -> np.ndarray:
    w = models * np.exp(-lam * (x - x.min()))
    return w / w.sum(axis=1, keepdims=True)


def kl_divergence(p: Sequence[float], q: Sequence[float]) -> float:
    """D_KL(p || q) with the convention 0 log 0 = 0; ``q`` must have full support."""
    pa = np.asarray(p, dtype=float)
    qa = np.asarray(q, dtype=float)
    mask = pa > 0
    return float(np.sum(pa[mask] * (np.log(pa[mask]) - np.log(qa[mask]))))


@dataclass(frozen=True)
class Roadmap:
    """A finite set of candidate models with a full-support prior over them."""

    models: np.ndarray
    prior: np.ndarray

    def __post_init__(self) -> None:
        models = np.atleast_2d(np.asarray(self.models, dtype=float))
        prior = np.atleast_1d(np.asarray(self.prior, dtype=float))
        if prior.size != models.shape[0]:
            raise DomainError(f"prior has {prior.size} weights for {models.shape[0]} models")
        rows = np.vstack([validate_model(row) for row in models])
        prior = validate_model(prior) if prior.size > 1 else _unit_prior(prior)
        for i in range(rows.shape[0]):
            for j in range(i):
                if np.array_equal(rows[i], rows[j]):
                    raise DomainError(f"roadmap models {j} and {i} coincide")
        rows.setflags(write=False)
        prior.setflags(write=False)
        object.__setattr__(self, "models", rows)
        object.__setattr__(self, "prior", prior)

    @classmethod
    def singleton(cls, q: Sequence[float]) -> "Roadmap":
        return cls(np.asarray([q], dtype=float), np.ones(1))

    @property
    def n_outcomes(self) -> int:
        return self.models.shape[1]

    @property
    def mean_model(self) -> np.ndarray:
        return self.prior @ self.models


def _unit_prior(prior: np.ndarray) -> np.ndarray:
    if abs(float(prior[0]) - 1.0) > PROB_TOL:
        raise DomainError(f"a single-model prior must put mass 1, got {prior[0]!r}")
    return np.ones(1)


def arc_value(r: Roadmap, x: Sequence[float], lam: float, cost: float = 0.0) -> float:
    """ARC value: prior average of per-model certainty equivalents minus the action cost."""
    xa = validate_profile(x, r.n_outcomes)
    return float(r.prior @ certainty_equivalents(r.models, xa, lam)) - float(cost)


def effective_belief(r: Roadmap, x: Sequence[float], lam: float) -> np.ndarray:
    """Prior average of the tilted beliefs; the gradient of ``arc_value`` in ``x``."""
    xa = validate_profile(x, r.n_outcomes)
    lam = _finite_lambda(lam, "effective_belief")
    return r.prior @ _tilt_rows(r.models, xa, lam)


def avg_kl_distortion(r: Roadmap, x: Sequence[float], lam: float) -> float:
    """Prior average of D_KL(tilt || model), the within-model distortion Nature pays for."""
    xa = validate_profile(x, r.n_outcomes)
    lam = _finite_lambda(lam, "avg_kl_distortion")
    tilts = _tilt_rows(r.models, xa, lam)
    kls = np.sum(tilts * (np.log(tilts) - np.log(r.models)), axis=1)
    return float(r.prior @ np.maximum(kls, 0.0))


def arc_gradient(r: Roadmap, x: np.ndarray, lam: float) -> np.ndarray:
    """Gradient (or, at lam = inf, a supergradient) of ``arc_value`` for solvers.

    At lam = 0 this is the mean model; at lam = inf it spreads unit mass over argmin x.
    """
    kind = classify_intensity(lam)
    if kind == "zero":
        return r.mean_model.copy()
    if kind == "inf":
        low = np.isclose(x, x.min(), rtol=0.0, atol=1e-12)
        return low / low.sum()
    return r.prior @ _tilt_rows(r.models, x, float(lam))
