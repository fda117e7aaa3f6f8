"""Ranking metrics against brute-force references, plus propensity summaries."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_err, brute_ndcg
from ultrlab.clicks import PositionBiasCurve
from ultrlab.metrics import (
    dcg_at_k,
    err_at_k,
    ndcg_at_k,
    normalized_propensity,
    propensity_error,
    ranking_metrics,
)
from ultrlab.propensity import PropensityEstimate


def test_ideal_ordering_scores_one():
    for labels in ([4, 3, 2, 1, 0], [2, 2, 1], [4]):
        for k in (1, 2, 5, 10):
            assert ndcg_at_k(labels, k) == pytest.approx(1.0, abs=1e-12)


def test_ndcg_hand_value():
    assert ndcg_at_k([0, 4], 2) == pytest.approx(1.0 / np.log2(3.0), abs=1e-12)


def test_all_zero_labels_score_one_by_convention():
    assert ndcg_at_k([0, 0, 0], 3) == 1.0


def test_dcg_basics():
    assert dcg_at_k([], 3) == 0.0
    assert dcg_at_k([4], 1) == pytest.approx(15.0, abs=1e-12)
    with pytest.raises(ValueError):
        dcg_at_k([1], 0)


def test_err_single_top_grade():
    assert err_at_k([4], 1) == pytest.approx(15.0 / 16.0, abs=1e-12)


def test_err_all_zero():
    assert err_at_k([0, 0, 0], 3) == 0.0


def test_err_two_top_grades():
    want = 15.0 / 16.0 + 0.5 * (15.0 / 16.0) * (1.0 / 16.0)
    assert err_at_k([4, 4], 2) == pytest.approx(want, abs=1e-12)
    assert err_at_k([4, 4], 2) == pytest.approx(0.966796875, abs=1e-9)


def test_err_rejects_bad_labels():
    with pytest.raises(ValueError):
        err_at_k([5], 1)
    with pytest.raises(ValueError):
        err_at_k([1], 0)


def test_metrics_match_brute_force_on_random_lists():
    rng = np.random.default_rng(23)
    for _ in range(1000):
        n = int(rng.integers(1, 13))
        labels = rng.integers(0, 5, size=n).tolist()
        k = int(rng.integers(1, 16))
        assert abs(ndcg_at_k(labels, k) - brute_ndcg(labels, k)) <= 1e-12
        assert abs(err_at_k(labels, k) - brute_err(labels, k)) <= 1e-12


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=10))
def test_err_nondecreasing_and_ndcg_bounded(labels):
    errs = [err_at_k(labels, k) for k in range(1, len(labels) + 1)]
    assert all(b >= a - 1e-15 for a, b in zip(errs, errs[1:]))
    for k in range(1, len(labels) + 2):
        v = ndcg_at_k(labels, k)
        assert 0.0 <= v <= 1.0 + 1e-12


def test_ranking_metrics_keys():
    out = ranking_metrics([3, 1, 0], cutoffs=(1, 3))
    assert set(out) == {"ndcg@1", "ndcg@3", "err@1", "err@3"}


def test_normalized_propensity_headline_value():
    est = PropensityEstimate.from_curve(PositionBiasCurve.inverse_rank(10), eta=1.0)
    got = normalized_propensity(est, ref_position=10)
    assert got[0] == pytest.approx(10.0, abs=1e-12)
    assert got[-1] == 1.0


def test_normalized_propensity_of_uniform_is_all_ones():
    est = PropensityEstimate.uniform(6)
    assert np.array_equal(normalized_propensity(est, ref_position=6), np.ones(6))


def test_normalized_propensity_accepts_plain_vectors_and_validates_ref():
    got = normalized_propensity(np.array([4.0, 2.0, 1.0]), ref_position=3)
    assert np.allclose(got, [4.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        normalized_propensity(np.ones(3), ref_position=4)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8),
       st.floats(0.1, 100.0))
def test_normalized_propensity_scale_invariance(weights, c):
    w = np.array(weights)
    ref = len(weights)
    a = normalized_propensity(w, ref_position=ref)
    b = normalized_propensity(c * w, ref_position=ref)
    assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_propensity_error_zero_at_truth():
    curve = PositionBiasCurve.inverse_rank(10)
    est = PropensityEstimate.from_curve(curve, eta=1.0)
    assert propensity_error(est, curve, eta=1.0) == pytest.approx(0.0, abs=1e-12)


def test_propensity_error_ignores_uniform_scaling():
    curve = PositionBiasCurve.inverse_rank(5)
    scaled = 0.5 * curve.examination(1.0)
    assert propensity_error(scaled, curve, eta=1.0) == pytest.approx(0.0, abs=1e-12)


def test_propensity_error_single_doubled_coordinate():
    curve = PositionBiasCurve.inverse_rank(10)
    w = curve.examination(1.0).copy()
    w[0] *= 2.0
    assert propensity_error(w, curve, eta=1.0) == pytest.approx(0.1, abs=1e-12)


def test_propensity_error_rejects_short_truth():
    curve = PositionBiasCurve.inverse_rank(3)
    with pytest.raises(ValueError):
        propensity_error(np.ones(5), curve, eta=1.0)
