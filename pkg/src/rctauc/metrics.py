"""Ranking-metric kernels: plain and weighted AUROC, empirical CDF, C-index, MAE.

All AUROC variants reduce to one quantity, the weighted pair sum

    S = sum_{i,j} a_i b_j score(s_i, s_j)

where ``score`` is 1 for s_i > s_j, the tie value for s_i == s_j and 0
otherwise. Sorting once and summing weights per distinct score value gives S
in O(n log n); the same layout works on a batch of weight vectors, which is
how bootstrap resamples are evaluated (a resample is a count-weighted copy of
the original rows).
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .data import DegenerateEstimationError


class TiePolicy(str, Enum):
    STRICT = "strict"
    HALF = "half"

    @property
    def tie_value(self) -> float:
        return 0.0 if self is TiePolicy.STRICT else 0.5


def as_tie(tie) -> TiePolicy:
    return tie if isinstance(tie, TiePolicy) else TiePolicy(str(tie))


class ScoreLayout:
    """Sorted order and tie groups of one score vector, reusable across weightings."""

    def __init__(self, scores):
        scores = np.asarray(scores, dtype=float)
        self.n = len(scores)
        self.order = np.argsort(scores, kind="mergesort")
        sorted_scores = scores[self.order]
        if self.n:
            new_group = np.empty(self.n, dtype=bool)
            new_group[0] = True
            np.not_equal(sorted_scores[1:], sorted_scores[:-1], out=new_group[1:])
            self.starts = np.flatnonzero(new_group)
        else:
            self.starts = np.zeros(0, dtype=int)

    def group_sums(self, w: np.ndarray) -> np.ndarray:
        """Sum weights per distinct score value, ascending. Works on (..., n)."""
        w = np.asarray(w, dtype=float)
        if self.n == 0:
            return np.zeros(w.shape[:-1] + (0,))
        return np.add.reduceat(w[..., self.order], self.starts, axis=-1)

    def pair_sum(self, a, b, tie) -> np.ndarray:
        """sum_{i,j} a_i b_j score(s_i, s_j); leading axes of a, b broadcast."""
        h = as_tie(tie).tie_value
        ga = self.group_sums(a)
        gb = self.group_sums(b)
        below = np.cumsum(gb, axis=-1) - gb
        return np.sum(ga * (below + h * gb), axis=-1)

    def pair_sum_off_diagonal(self, a, b, tie) -> np.ndarray:
        """As ``pair_sum`` but dropping the i == j terms."""
        h = as_tie(tie).tie_value
        diag = np.sum(np.asarray(a, float) * np.asarray(b, float), axis=-1)
        return self.pair_sum(a, b, tie) - h * diag


def _check_side(values, name):
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if len(v) == 0:
        raise DegenerateEstimationError(f"empty {name}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite entries in {name}")
    return v


def auc(pos_scores, neg_scores, tie=TiePolicy.STRICT) -> float:
    """AUROC of positives against negatives by rank counting."""
    pos = _check_side(pos_scores, "positive scores")
    neg = _check_side(neg_scores, "negative scores")
    scores = np.concatenate([pos, neg])
    a = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    layout = ScoreLayout(scores)
    return float(layout.pair_sum(a, 1.0 - a, tie)) / (len(pos) * len(neg))


def auc_bruteforce(pos_scores, neg_scores, tie=TiePolicy.STRICT) -> float:
    pos = _check_side(pos_scores, "positive scores")
    neg = _check_side(neg_scores, "negative scores")
    h = as_tie(tie).tie_value
    diff = pos[:, None] - neg[None, :]
    return float(np.mean((diff > 0) + h * (diff == 0)))


def labelled_auc(scores, labels, tie=TiePolicy.STRICT) -> float:
    """AUROC of a score vector against binary labels."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos, neg = scores[labels == 1], scores[labels == 0]
    if len(pos) == 0:
        raise DegenerateEstimationError("no positive outcomes")
    if len(neg) == 0:
        raise DegenerateEstimationError("no negative outcomes")
    return auc(pos, neg, tie)


def weighted_auc(pos_scores, pos_weights, neg_scores, neg_weights,
                 tie=TiePolicy.STRICT, exclude_same_index=False) -> float:
    """Self-normalised weighted AUROC.

    Returns sum_{i,j} w+_i w-_j score(i, j) / sum_{i,j} w+_i w-_j. With
    ``exclude_same_index`` the two sides must be the same sample list and the
    i == j pairs are dropped from numerator and denominator.
    """
    pos = _check_side(pos_scores, "positive scores")
    neg = _check_side(neg_scores, "negative scores")
    wp = np.asarray(pos_weights, dtype=float)
    wn = np.asarray(neg_weights, dtype=float)
    if wp.shape != pos.shape or wn.shape != neg.shape:
        raise ValueError("weight vectors must match their score vectors")
    if (wp < 0).any() or (wn < 0).any():
        raise ValueError("weights must be non-negative")
    if exclude_same_index:
        if pos.shape != neg.shape or not np.array_equal(pos, neg):
            raise ValueError("exclude_same_index requires identical positive and negative lists")
        return signed_weighted_auc(pos, wp, wn, tie)
    scores = np.concatenate([pos, neg])
    a = np.concatenate([wp, np.zeros(len(neg))])
    b = np.concatenate([np.zeros(len(pos)), wn])
    denom = wp.sum() * wn.sum()
    if not denom > 0:
        raise DegenerateEstimationError("degenerate weighting")
    return float(ScoreLayout(scores).pair_sum(a, b, tie)) / denom


def signed_weighted_auc(scores, pos_weights, neg_weights, tie=TiePolicy.STRICT,
                        min_denominator=0.0) -> float:
    """Weighted AUROC over one sample list, both sides, diagonal excluded.

    Weights may be negative here (the CATE-corrected weighting produces
    signed weights); the denominator must stay above ``min_denominator``.
    """
    s = _check_side(scores, "scores")
    a = np.asarray(pos_weights, dtype=float)
    b = np.asarray(neg_weights, dtype=float)
    if a.shape != s.shape or b.shape != s.shape:
        raise ValueError("weight vectors must match the score vector")
    denom = a.sum() * b.sum() - np.dot(a, b)
    if not denom > min_denominator:
        raise DegenerateEstimationError("degenerate weighting")
    num = ScoreLayout(s).pair_sum_off_diagonal(a, b, tie)
    return float(num) / denom


def weighted_auc_bruteforce(pos_scores, pos_weights, neg_scores, neg_weights,
                            tie=TiePolicy.STRICT, exclude_same_index=False) -> float:
    h = as_tie(tie).tie_value
    pos, neg = np.asarray(pos_scores, float), np.asarray(neg_scores, float)
    w = np.outer(np.asarray(pos_weights, float), np.asarray(neg_weights, float))
    diff = pos[:, None] - neg[None, :]
    pair = (diff > 0) + h * (diff == 0)
    if exclude_same_index:
        np.fill_diagonal(w, 0.0)
    return float(np.sum(w * pair) / np.sum(w))


def empirical_cdf(query_scores, reference_scores, tie=TiePolicy.STRICT) -> np.ndarray:
    """Fraction of reference scores below each query score (ties per policy)."""
    ref = np.sort(_check_side(reference_scores, "reference scores"))
    q = np.asarray(query_scores, dtype=float)
    below = np.searchsorted(ref, q, side="left")
    if as_tie(tie) is TiePolicy.HALF:
        equal = np.searchsorted(ref, q, side="right") - below
        return (below + 0.5 * equal) / len(ref)
    return below / len(ref)


def c_index(estimated_values, true_values) -> float:
    """Concordance between two orderings over pairs with distinct true values."""
    est = np.asarray(estimated_values, dtype=float)
    true = np.asarray(true_values, dtype=float)
    if est.shape != true.shape or est.ndim != 1:
        raise ValueError("estimated and true values must be vectors of equal length")
    if len(est) < 2:
        raise ValueError("need at least two values")
    iu, ju = np.triu_indices(len(est), k=1)
    dt = np.sign(true[iu] - true[ju])
    de = np.sign(est[iu] - est[ju])
    comparable = dt != 0
    if not comparable.any():
        raise ValueError("no comparable pairs")
    agree = np.where(de == 0, 0.5, (de == dt).astype(float))
    return float(agree[comparable].mean())


def mae(estimates, truths) -> float:
    est = np.asarray(estimates, dtype=float)
    tr = np.asarray(truths, dtype=float)
    if est.shape != tr.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {tr.shape}")
    if est.size == 0:
        raise ValueError("need at least one value")
    return float(np.mean(np.abs(est - tr)))
