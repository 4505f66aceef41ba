import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustpa.entropic import (
    Roadmap,
    arc_gradient,
    arc_value,
    avg_kl_distortion,
    certainty_equivalent,
    classify_intensity,
    effective_belief,
    kl_divergence,
    tilted_belief,
    validate_model,
)
from robustpa.errors import DomainError, UnsupportedEndpointError

from oracles import ce, finite_difference_gradient, kl, penalized_grid_min

LN3 = math.log(3.0)


def model(n):
    return st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n).map(lambda v: np.asarray(v) / np.sum(v))


def profile(n, scale=5.0):
    return st.lists(st.floats(-scale, scale), min_size=n, max_size=n).map(np.asarray)


lams = st.floats(0.05, 5.0)


@st.composite
def roadmaps(draw, n=3):
    k = draw(st.integers(1, 3))
    models = [draw(model(n)) for _ in range(k)]
    # distinct rows are required; nudge duplicates apart
    for i in range(1, k):
        if any(np.allclose(models[i], models[j]) for j in range(i)):
            models[i] = np.roll(models[i], 1) * 0.5 + models[i] * 0.5
            if any(np.array_equal(models[i], models[j]) for j in range(i)):
                models = models[:i]
                break
    w = draw(model(len(models))) if len(models) > 1 else np.ones(1)
    return Roadmap(np.stack(models), w)


# --- certainty equivalent -------------------------------------------------------------------------


@pytest.mark.parametrize("lam", [0.0, 0.3, 1.0, 7.0, math.inf])
def test_constant_profile_is_its_own_certainty_equivalent(lam):
    assert certainty_equivalent([0.5, 0.5], [2.5, 2.5], lam) == pytest.approx(2.5, abs=1e-14)


def test_certainty_equivalent_reference_value():
    value = certainty_equivalent([0.5, 0.5], [0.0, LN3], 1.0)
    assert value == pytest.approx(-math.log(2 / 3), abs=1e-12)
    assert value == pytest.approx(0.405465, abs=1e-6)
    _, grid_min = penalized_grid_min([0.5, 0.5], [0.0, LN3], 1.0, mesh=1e-4)
    assert value == pytest.approx(grid_min, abs=1e-6)


@pytest.mark.parametrize("lam,expected", [(0.0, 0.5 * LN3), (math.inf, 0.0), (1e-11, 0.5 * LN3), (1e11, 0.0)])
def test_endpoints(lam, expected):
    assert certainty_equivalent([0.5, 0.5], [0.0, LN3], lam) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("lam,kind", [(0.0, "zero"), (5e-11, "zero"), (1e-10, "finite"), (1.0, "finite"), (1e10, "finite"), (2e10, "inf"), (math.inf, "inf")])
def test_classify_intensity(lam, kind):
    assert classify_intensity(lam) == kind


@pytest.mark.parametrize("lam", [-1.0, math.nan])
def test_negative_intensity_rejected(lam):
    with pytest.raises(DomainError):
        classify_intensity(lam)


@pytest.mark.parametrize("x", [[0.0, math.inf], [math.nan, 1.0], [-math.inf, 0.0]])
def test_non_finite_profile_rejected(x):
    with pytest.raises(DomainError):
        certainty_equivalent([0.5, 0.5], x, 1.0)


@pytest.mark.parametrize("q", [[0.5, 0.6], [1.0, 0.0], [-0.1, 1.1], [1.0]])
def test_invalid_models_rejected(q):
    with pytest.raises(DomainError):
        validate_model(q)


def test_validation_renormalizes_rounding():
    q = validate_model([0.3, 0.7 + 5e-13])
    assert q.sum() == pytest.approx(1.0, abs=1e-15)


def test_no_overflow_for_large_profiles():
    value = certainty_equivalent([0.5, 0.5], [-800.0, 800.0], 1.0)
    assert value == pytest.approx(-800.0 + math.log(2.0), abs=1e-9)


@given(model(3), profile(3), lams)
def test_matches_unshifted_closed_form(q, x, lam):
    assert certainty_equivalent(q, x, lam) == pytest.approx(ce(q, x, lam), abs=1e-10)


@given(model(3), profile(3), lams, lams)
def test_decreasing_in_lambda(q, x, a, b):
    lo, hi = sorted((a, b))
    v_lo, v_hi = certainty_equivalent(q, x, lo), certainty_equivalent(q, x, hi)
    assert v_hi <= v_lo + 1e-12
    if hi - lo > 1e-3 and np.ptp(x) > 1e-2:
        assert v_hi < v_lo


@given(model(3), profile(3))
def test_endpoint_limits(q, x):
    assert abs(certainty_equivalent(q, x, 1e-7) - q @ x) <= 1e-5
    for lam in (10.0, 100.0, 1000.0):
        assert abs(certainty_equivalent(q, x, lam) - x.min()) <= abs(math.log(q.min())) / lam + 1e-12


# --- tilted belief --------------------------------------------------------------------------------


def test_tilt_reference_value():
    np.testing.assert_allclose(tilted_belief([0.5, 0.5], [0.0, LN3], 1.0), [0.75, 0.25], rtol=0, atol=1e-15)


@given(model(3), st.floats(-3, 3), lams)
def test_tilt_of_constant_profile_is_identity(q, c, lam):
    np.testing.assert_allclose(tilted_belief(q, np.full(3, c), lam), q, rtol=0, atol=1e-14)


@pytest.mark.parametrize("lam", [0.0, math.inf])
def test_tilt_rejects_endpoints(lam):
    with pytest.raises(UnsupportedEndpointError):
        tilted_belief([0.5, 0.5], [0.0, 1.0], lam)


@pytest.mark.parametrize("q,x,lam", [([0.2, 0.3, 0.5], [1.0, -0.5, 0.3], 2.0), ([0.6, 0.4], [0.0, 1.5], 0.7)])
def test_tilt_minimizes_penalized_objective(q, x, lam):
    p_grid, _ = penalized_grid_min(q, x, lam, mesh=1e-3)
    np.testing.assert_allclose(tilted_belief(q, x, lam), p_grid, rtol=0, atol=1e-3)


@given(model(3), profile(3), lams)
def test_tilt_attains_certainty_equivalent(q, x, lam):
    p = tilted_belief(q, x, lam)
    assert np.all(p > 0) and p.sum() == pytest.approx(1.0, abs=1e-12)
    assert p @ x + kl(p, q) / lam == pytest.approx(certainty_equivalent(q, x, lam), abs=1e-9)


# --- ARC value ------------------------------------------------------------------------------------


@given(model(3), profile(3), lams, st.floats(-2, 2))
def test_singleton_arc_is_multiplier_value(q, x, lam, cost):
    assert arc_value(Roadmap.singleton(q), x, lam, cost) == pytest.approx(certainty_equivalent(q, x, lam) - cost, abs=1e-12)


@given(roadmaps(), st.floats(-4, 4), st.sampled_from([0.0, 0.5, 2.0, math.inf]), st.floats(-2, 2))
def test_constant_profile_arc(r, c, lam, cost):
    assert arc_value(r, np.full(3, c), lam, cost) == pytest.approx(c - cost, abs=1e-12)


@pytest.mark.parametrize("beta", np.linspace(-5, 5, 11))
def test_arc_of_linear_profile_matches_moment_formula(beta):
    q1, q2 = np.array([0.3, 0.4, 0.3]), np.array([0.45, 0.1, 0.45])
    r = Roadmap([q1, q2], [0.5, 0.5])
    m = [q[0] + q[1] * math.exp(-beta) + q[2] * math.exp(-2 * beta) for q in (q1, q2)]
    expected = -(0.5 * math.log(m[0]) + 0.5 * math.log(m[1])) - 1.0
    assert arc_value(r, [0.0, beta, 2 * beta], 1.0, cost=1.0) == pytest.approx(expected, abs=1e-12)


@given(roadmaps(), profile(3), st.sampled_from([0.0, 0.4, 1.0, 3.0, math.inf]), st.floats(-10, 10))
def test_translation_invariance(r, x, lam, zeta):
    assert arc_value(r, x - zeta, lam) == pytest.approx(arc_value(r, x, lam) - zeta, abs=1e-12)


# lam times the profile range stays below 12 so the increase is above float resolution
@given(roadmaps(), profile(3, scale=2.0), st.floats(0.05, 3.0), st.integers(0, 2), st.floats(0.01, 2.0))
def test_strictly_increasing_in_each_coordinate(r, x, lam, y, bump):
    up = x.copy()
    up[y] += bump
    assert arc_value(r, up, lam) > arc_value(r, x, lam)


@given(roadmaps(), profile(3), profile(3), lams, st.floats(0.0, 1.0))
def test_concavity(r, x, xp, lam, t):
    mid = arc_value(r, t * x + (1 - t) * xp, lam)
    assert mid >= t * arc_value(r, x, lam) + (1 - t) * arc_value(r, xp, lam) - 1e-10


@given(roadmaps(), profile(3), lams)
def test_linear_in_prior(r, x, lam):
    parts = [certainty_equivalent(q, x, lam) for q in r.models]
    assert arc_value(r, x, lam) == pytest.approx(float(r.prior @ parts), abs=1e-12)


# --- effective belief and distortion --------------------------------------------------------------


@given(roadmaps(), st.floats(-3, 3), lams)
def test_effective_belief_of_constant_is_mean_model(r, c, lam):
    np.testing.assert_allclose(effective_belief(r, np.full(3, c), lam), r.mean_model, rtol=0, atol=1e-14)


@given(model(3), profile(3), lams)
def test_effective_belief_of_singleton_is_tilt(q, x, lam):
    np.testing.assert_allclose(effective_belief(Roadmap.singleton(q), x, lam), tilted_belief(q, x, lam), rtol=0, atol=1e-14)


@settings(max_examples=50)
@given(roadmaps(), profile(3, scale=3.0), lams)
def test_effective_belief_is_gradient(r, x, lam):
    fd = finite_difference_gradient(lambda v: arc_value(r, v, lam), x)
    eff = effective_belief(r, x, lam)
    np.testing.assert_allclose(eff, fd, rtol=0, atol=1e-5)
    assert np.all(eff > 0) and eff.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(arc_gradient(r, x, lam), eff, rtol=0, atol=1e-15)


def test_arc_gradient_endpoints():
    r = Roadmap([[0.2, 0.3, 0.5], [0.5, 0.25, 0.25]], [0.5, 0.5])
    np.testing.assert_allclose(arc_gradient(r, np.array([1.0, 2.0, 3.0]), 0.0), r.mean_model)
    np.testing.assert_allclose(arc_gradient(r, np.array([1.0, 0.0, 0.0]), math.inf), [0.0, 0.5, 0.5])


def test_distortion_reference_value():
    value = avg_kl_distortion(Roadmap.singleton([0.5, 0.5]), [0.0, LN3], 1.0)
    assert value == pytest.approx(kl_divergence([0.75, 0.25], [0.5, 0.5]), abs=1e-15)
    assert value == pytest.approx(0.130812, abs=1e-6)


@given(roadmaps(), st.floats(-3, 3), lams)
def test_distortion_zero_for_constant(r, c, lam):
    assert avg_kl_distortion(r, np.full(3, c), lam) == pytest.approx(0.0, abs=1e-14)


@given(roadmaps(), profile(3), lams, st.floats(-10, 10))
def test_distortion_nonnegative_and_translation_invariant(r, x, lam, zeta):
    k = avg_kl_distortion(r, x, lam)
    assert k >= 0.0
    assert avg_kl_distortion(r, x - zeta, lam) == pytest.approx(k, abs=1e-12)
    if np.ptp(x) > 0.1:
        assert k > 0.0


def test_roadmap_rejects_duplicates_and_bad_priors():
    with pytest.raises(DomainError):
        Roadmap([[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5])
    with pytest.raises(DomainError):
        Roadmap([[0.5, 0.5], [0.4, 0.6]], [0.5, 0.6])
    with pytest.raises(DomainError):
        Roadmap([[0.5, 0.5], [0.4, 0.6]], [1.0, 0.0])
