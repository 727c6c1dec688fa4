import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from rctauc.data import DegenerateEstimationError
from rctauc.metrics import (ScoreLayout, TiePolicy, auc, auc_bruteforce, c_index,
                            empirical_cdf, labelled_auc, mae, signed_weighted_auc,
                            weighted_auc, weighted_auc_bruteforce)

# coarse grid so that ties occur often
scores = st.lists(st.integers(-5, 5).map(float), min_size=1, max_size=40)
weights = st.floats(0.0, 3.0, allow_nan=False)


def test_auc_examples():
    assert auc([0.9, 0.8], [0.1, 0.2]) == 1.0
    assert auc([0.5], [0.5], "half") == 0.5
    assert auc([0.5], [0.5], "strict") == 0.0
    assert auc([0.3, 0.7], [0.5, 0.1], "strict") == 0.75


def test_auc_empty_side_is_degenerate():
    with pytest.raises(DegenerateEstimationError):
        auc([], [0.1])
    with pytest.raises(DegenerateEstimationError):
        labelled_auc([0.1, 0.2], [1, 1])


def test_weighted_auc_examples():
    pos, neg = [0.3, 0.7, 0.2], [0.5, 0.1]
    assert weighted_auc(pos, np.ones(3), neg, np.ones(2)) == auc(pos, neg)
    assert weighted_auc(pos, [1, 0, 1], neg, [1, 1]) == auc([0.3, 0.2], neg)
    got = weighted_auc([0.2, 0.8], [0.25, 0.75], [0.2, 0.8], [0.75, 0.25], "strict",
                       exclude_same_index=True)
    assert got == pytest.approx(0.9, abs=1e-15)


def test_weighted_auc_rejects_negative_weights():
    with pytest.raises(ValueError):
        weighted_auc([0.1], [-1.0], [0.0], [1.0])


def test_empirical_cdf_examples():
    ref = [1, 2, 3, 4]
    assert list(empirical_cdf([5], ref)) == [1.0]
    assert list(empirical_cdf(ref, ref, "strict")) == [0, 0.25, 0.5, 0.75]
    assert list(empirical_cdf([2.5], ref)) == [0.5]
    assert list(empirical_cdf([2], ref, "half")) == [0.375]


def test_c_index_examples():
    assert c_index([1, 2, 3], [1, 2, 3]) == 1.0
    assert c_index([3, 2, 1], [1, 2, 3]) == 0.0
    assert c_index([1, 2, 2], [1, 2, 3]) == pytest.approx(2.5 / 3)
    with pytest.raises(ValueError, match="no comparable pairs"):
        c_index([1, 2], [5, 5])


def test_mae_examples():
    assert mae([0.3, 0.4], [0.3, 0.4]) == 0
    assert mae([0.6], [0.5]) == pytest.approx(0.1)
    assert mae([0.6, 0.4], [0.5, 0.7]) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        mae([1.0], [1.0, 2.0])


@given(scores, scores)
def test_auc_matches_bruteforce(pos, neg):
    for tie in TiePolicy:
        assert abs(auc(pos, neg, tie) - auc_bruteforce(pos, neg, tie)) < 1e-12


@given(scores, scores)
def test_auc_complement(pos, neg):
    assert auc(pos, neg, "half") + auc(neg, pos, "half") == pytest.approx(1.0, abs=1e-12)
    tied = np.mean(np.subtract.outer(pos, neg) == 0)
    assert auc(pos, neg, "strict") + auc(neg, pos, "strict") == pytest.approx(1 - tied, abs=1e-12)


@given(scores, scores)
def test_auc_invariant_under_increasing_transform(pos, neg):
    f = lambda v: np.exp(np.asarray(v) / 3.0) * 7 - 2
    for tie in TiePolicy:
        assert auc(f(pos), f(neg), tie) == pytest.approx(auc(pos, neg, tie), abs=1e-12)


@given(scores, scores, st.floats(0.1, 50.0))
def test_weighted_auc_uniform_and_scaled(pos, neg, k):
    base = auc(pos, neg)
    assert abs(weighted_auc(pos, np.full(len(pos), k), neg, np.ones(len(neg))) - base) < 1e-12


@given(st.data())
def test_weighted_auc_matches_bruteforce(data):
    pos = data.draw(scores)
    neg = data.draw(scores)
    wp = data.draw(st.lists(weights, min_size=len(pos), max_size=len(pos)))
    wn = data.draw(st.lists(weights, min_size=len(neg), max_size=len(neg)))
    assume(sum(wp) > 0.01 and sum(wn) > 0.01)
    k = data.draw(st.floats(0.1, 10.0))
    for tie in TiePolicy:
        got = weighted_auc(pos, wp, neg, wn, tie)
        assert got == pytest.approx(weighted_auc_bruteforce(pos, wp, neg, wn, tie), abs=1e-12)
        assert got == pytest.approx(weighted_auc(pos, np.multiply(wp, k), neg, wn, tie),
                                    abs=1e-12)


@given(st.data())
def test_off_diagonal_weighted_auc_matches_bruteforce(data):
    s = data.draw(st.lists(st.integers(-3, 3).map(float), min_size=2, max_size=30))
    wp = data.draw(st.lists(weights, min_size=len(s), max_size=len(s)))
    wn = data.draw(st.lists(weights, min_size=len(s), max_size=len(s)))
    w = np.outer(wp, wn)
    np.fill_diagonal(w, 0)
    assume(w.sum() > 0.01)
    for tie in TiePolicy:
        got = weighted_auc(s, wp, s, wn, tie, exclude_same_index=True)
        ref = weighted_auc_bruteforce(s, wp, s, wn, tie, exclude_same_index=True)
        assert got == pytest.approx(ref, abs=1e-12)


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=60))
def test_half_cdf_averages_to_one_half(v):
    assert np.mean(empirical_cdf(v, v, "half")) == pytest.approx(0.5, abs=1e-12)


def test_signed_weights_allowed_and_degenerate_denominator():
    s = np.array([0.1, 0.5, 0.9])
    a = np.array([1.0, -0.2, 0.6])
    b = 1 - a
    got = signed_weighted_auc(s, a, b)
    w = np.outer(a, b)
    np.fill_diagonal(w, 0)
    ref = np.sum(w * (s[:, None] > s[None, :])) / w.sum()
    assert got == pytest.approx(ref, abs=1e-12)
    with pytest.raises(DegenerateEstimationError):
        signed_weighted_auc(s, np.zeros(3), np.ones(3))


def test_layout_batched_pair_sum_matches_loop():
    rng = np.random.default_rng(0)
    s = rng.integers(0, 5, 30).astype(float)
    a = rng.random((4, 30))
    b = rng.random((4, 30))
    lay = ScoreLayout(s)
    batched = lay.pair_sum(a, b, "half")
    for k in range(4):
        assert batched[k] == pytest.approx(lay.pair_sum(a[k], b[k], "half"), rel=1e-13)
