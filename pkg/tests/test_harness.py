import json
from dataclasses import replace

import numpy as np
import pytest

from rctauc.data import Method, RctDataset, make_nuisance
from rctauc.dgp import DgpConfig, gen_model_spectrum, gen_pool
from rctauc.harness import (PowerConfig, SweepConfig, bootstrap_ci, bootstrap_pvalue, power_at,
                            resample_counts, run_bias_check, run_cindex_sweep, run_mae_sweep,
                            run_power, smallest_n_reaching)
from rctauc.io import report_to_json

SMALL_DGP = DgpConfig(pool_size=20_000, delta=0.2, seed=11)
SIZES = (100, 300, 900, 1600, 2500)


def _sweep(**kw):
    base = dict(dgp=SMALL_DGP, n_rct=200, replications=20, training_sizes=SIZES)
    base.update(kw)
    return SweepConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(replications=0)
    with pytest.raises(ValueError):
        SweepConfig(ate_grid=())
    with pytest.raises(ValueError):
        SweepConfig(nuisance_mode="magic")
    with pytest.raises(ValueError):
        PowerConfig(bootstrap_samples=50)
    with pytest.raises(ValueError):
        PowerConfig(significance=1.0)


def test_bootstrap_ci_examples():
    assert bootstrap_ci([0.3, 0.3, 0.3]) == (0.3, 0.3)
    assert bootstrap_ci([0.7]) == (0.7, 0.7)
    v = np.random.default_rng(0).normal(size=1000)
    lo, hi = bootstrap_ci(v, 0.95, 2000, np.random.default_rng(1))
    assert hi - lo == pytest.approx(2 * 1.96 / np.sqrt(1000), rel=0.2)
    assert lo <= v.mean() <= hi


@pytest.fixture(scope="module")
def mae_report():
    return run_mae_sweep(_sweep(noise_grid=(0.0,), replications=40))


def test_mae_rows_are_consistent(mae_report):
    for row in mae_report.rows:
        assert row.ci_lo <= row.mean <= row.ci_hi
        assert row.used + row.skipped == 40
        assert row.skipped / 40 < 0.05


def test_mae_npw_not_worse_than_standard_on_average(mae_report):
    npw = np.mean([m for _, m in mae_report.series("npw", "model")])
    std = np.mean([m for _, m in mae_report.series("standard", "model")])
    assert npw <= std


def test_sweep_is_deterministic(mae_report):
    again = run_mae_sweep(_sweep(noise_grid=(0.0,), replications=40))
    assert report_to_json(again) == report_to_json(mae_report)


def test_single_replication_collapses_ci():
    report = run_mae_sweep(_sweep(replications=1, training_sizes=(100, 900)))
    for row in report.rows:
        if row.used:
            assert row.ci_lo == row.mean == row.ci_hi


def test_zero_randomization_collapses_methods():
    cfg = _sweep(dgp=replace(SMALL_DGP, pi=0.0), replications=5,
                 estimator_set=tuple(Method), training_sizes=(100, 900))
    report = run_mae_sweep(cfg)
    for model, value in report.series("standard", "model"):
        for m in Method:
            if m is Method.TREATED:
                continue  # no treated rows at all
            assert report.row(m, model=model).mean == value


def test_cindex_sweep_shape_and_provenance():
    cfg = _sweep(ate_grid=(0.0, 0.2), replications=5)
    report = run_cindex_sweep(cfg)
    assert {r.setting["ate"] for r in report.rows} == {0.0, 0.2}
    assert set(report.provenance["true_auc_range"]) == {"0.0", "0.2"}
    assert report.provenance["config"]["tie"] == "strict"
    with pytest.raises(ValueError, match="at least 5 models"):
        run_cindex_sweep(_sweep(training_sizes=(100, 200)))


def test_bias_check_without_effect_is_unbiased():
    dgp = DgpConfig(pool_size=20_000, delta=0.0, seed=12)
    pool = gen_pool(dgp)
    model = gen_model_spectrum(pool, (500,), np.random.default_rng(0))[0]
    row = run_bias_check(SweepConfig(dgp=dgp, n_rct=300, replications=300, noise_grid=(0.0,)),
                         model, pool)
    assert row.extra["predicted_bias"] == 0.0
    for m in ("naive", "npw"):
        assert abs(row.extra[f"{m}_bias"]) < 3 * row.extra[f"{m}_se"]


def test_resample_counts():
    rng = np.random.default_rng(0)
    counts = resample_counts(10, 50, rng)
    assert counts.shape == (50, 10) and np.all(counts.sum(axis=1) == 10)
    strata = np.array([0, 0, 0, 1, 1, 1, 1, 1, 1, 1])
    counts = resample_counts(10, 50, rng, strata)
    assert np.all(counts[:, :3].sum(axis=1) == 3) and np.all(counts[:, 3:].sum(axis=1) == 7)


def test_bootstrap_pvalue_rules():
    assert bootstrap_pvalue([0.5, 0.6], [0.5, 0.7]) == 0.5  # ties count for the null
    assert np.isnan(bootstrap_pvalue([np.nan, np.nan, 0.1], [0.2, 0.2, 0.2]))
    assert bootstrap_pvalue([np.nan, 0.1, 0.3], [0.2, 0.2, 0.2]) == 0.5


@pytest.fixture(scope="module")
def power_setup():
    pool = gen_pool(SMALL_DGP)
    lin = pool.features @ pool.w_y
    rng = np.random.default_rng(0)
    b = lin + rng.normal(0, 0.5 * lin.std(), pool.size)
    a = lin + rng.normal(0, 2.0 * lin.std(), pool.size)
    return pool, a, b


def test_power_grows_with_n_and_with_alpha(power_setup):
    pool, a, b = power_setup
    cfg = PowerConfig(n_grid=(60, 400), bootstrap_samples=200, repetitions=20)
    report = run_power(pool, a, b, cfg)
    for m in ("standard", "naive", "npw"):
        series = [p for _, p in sorted(report.series(m, "n"))]
        assert series == sorted(series)
        for n in cfg.n_grid:
            assert power_at(report, m, n, 0.01) <= power_at(report, m, n, 0.05)
            row = report.row(m, n=n)
            assert row.used + row.skipped == 20
    assert smallest_n_reaching(report, "npw", 0.5) is not None


def test_identical_scores_never_reject(power_setup):
    pool, a, _ = power_setup
    report = run_power(pool, a, a, PowerConfig(n_grid=(200,), bootstrap_samples=100,
                                               repetitions=5))
    for row in report.rows:
        assert row.mean == 0.0
        assert all(p == 1.0 for p in row.extra["pvalues"])


def test_power_on_dataset_with_provided_nuisance(power_setup):
    pool, a, b = power_setup
    rng = np.random.default_rng(3)
    idx = rng.choice(pool.size, 600, replace=False)
    t = (rng.random(600) < 0.5).astype(int)
    y = np.where(t == 1, pool.y1[idx], pool.y0[idx])
    ds = RctDataset(pool.features[idx], y, t, 0.5)
    nu = make_nuisance(pool.omega_true[idx], pool.tau_effective[idx], ds)
    cfg = PowerConfig(n_grid=(300,), bootstrap_samples=100, repetitions=4,
                      nuisance_mode="provided")
    report = run_power(ds, a[idx], b[idx], cfg, nuisance=nu)
    assert all(r.used == 4 for r in report.rows)
    with pytest.raises(ValueError):
        run_power(ds, a[idx], b[idx][:10], cfg, nuisance=nu)


def test_power_report_is_json_serialisable(power_setup):
    pool, a, b = power_setup
    report = run_power(pool, a, b, PowerConfig(n_grid=(100,), bootstrap_samples=100,
                                               repetitions=2))
    json.loads(report_to_json(report))
