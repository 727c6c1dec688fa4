import numpy as np
import pytest
from hypothesis import given, strategies as st

from rctauc.data import (EPS, BiasDiagnostics, NuisanceEstimates, RctDataset, ScoreSet,
                         make_nuisance, plugin_aggregates, split_by_treatment, validate_dataset)


def _ds(y, t, pi=0.5):
    return RctDataset.without_features(np.array(y), np.array(t), pi)


def test_valid_dataset_has_no_violations():
    assert validate_dataset(_ds([1, 0, 1, 0], [0, 0, 1, 1])) == []


def test_non_binary_outcome_flagged():
    assert "non-binary outcome" in validate_dataset(_ds([2, 0, 1, 0], [0, 0, 1, 1]))


def test_empty_treatment_arm_flagged_when_required():
    ds = _ds([1, 0, 1, 0], [0, 0, 0, 0])
    assert "empty treatment arm" not in validate_dataset(ds)
    assert "empty treatment arm" in validate_dataset(ds, require_both_arms=True)


def test_length_mismatch_and_bad_pi():
    ds = RctDataset(np.zeros((3, 1)), np.array([1, 0]), np.array([0, 1]), 1.5)
    problems = validate_dataset(ds)
    assert any(p.startswith("length mismatch") for p in problems)
    assert any("randomization probability" in p for p in problems)


def test_validation_is_idempotent():
    ds = _ds([2, 0, 1], [0, 1, 3])
    assert validate_dataset(ds) == validate_dataset(ds)
    assert list(ds.outcome) == [2, 0, 1]


@pytest.mark.parametrize("t, control, treated", [
    ([0, 1, 0, 1], [0, 2], [1, 3]),
    ([0, 0, 0], [0, 1, 2], []),
    ([1, 1, 0], [2], [0, 1]),
])
def test_split_examples(t, control, treated):
    c, tr = split_by_treatment(_ds([0] * len(t), t))
    assert list(c.indices) == control
    assert list(tr.indices) == treated


@given(st.lists(st.integers(0, 1), min_size=0, max_size=50))
def test_split_is_a_partition(t):
    c, tr = split_by_treatment(_ds([0] * len(t), t))
    both = np.concatenate([c.indices, tr.indices])
    assert len(np.intersect1d(c.indices, tr.indices)) == 0
    assert sorted(both.tolist()) == list(range(len(t)))


def test_dataset_arrays_are_read_only():
    ds = _ds([1, 0], [0, 1])
    with pytest.raises(ValueError):
        ds.outcome[0] = 0


def test_subset_carries_source_index():
    ds = RctDataset(np.arange(4.0), [1, 0, 1, 0], [0, 1, 0, 1], 0.5, source_index=[10, 11, 12, 13])
    sub = ds.subset([3, 1])
    assert list(sub.source_index) == [13, 11]
    assert list(sub.features[:, 0]) == [3.0, 1.0]


def test_empirical_rate_is_separate_from_design_pi():
    ds = _ds([1, 0, 1, 0], [1, 1, 1, 0], pi=0.5)
    assert ds.randomization_prob == 0.5
    assert ds.empirical_treatment_rate == 0.75


def test_scoreset_rejects_non_finite():
    with pytest.raises(ValueError):
        ScoreSet("m", [0.1, np.nan])


def test_plugin_aggregates():
    mu1, mu0, tau_bar = plugin_aggregates([1, 1, 0, 1], [0.1, 0.2, 0.3, 0.2])
    assert mu1 == 0.75
    assert tau_bar == pytest.approx(0.2)
    assert mu0 == pytest.approx(0.55)
    # mu0 is clamped into [eps, 1 - eps]
    assert plugin_aggregates([0, 0], [0.5, 0.5])[1] == EPS


def test_make_nuisance_clips_omega_and_uses_treated_rows():
    ds = _ds([1, 0, 1, 0], [0, 1, 1, 1])
    nu = make_nuisance([0.0, 0.5, 1.0, 0.3], [9.0, 0.1, 0.2, 0.3], ds)
    assert nu.omega_hat[0] == EPS and nu.omega_hat[2] == 1 - EPS
    assert nu.tau_bar_hat == pytest.approx(0.2)
    assert nu.mu1_hat == pytest.approx(1 / 3)


def test_nuisance_for_rows_with_indices():
    nu = NuisanceEstimates([0.1, 0.2], [0.0, 0.5], 0.5, 0.4, 0.1, indices=[4, 7],
                           full_length=False)
    om, tau = nu.for_rows([7, 4])
    assert list(om) == [0.2, 0.1] and list(tau) == [0.5, 0.0]
    with pytest.raises(ValueError):
        nu.for_rows([5])


def test_bias_diagnostics_prediction():
    assert BiasDiagnostics(0.08, 2.0, 0.3, 0.01).predicted_bias == pytest.approx(0.004)
