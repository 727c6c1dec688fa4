"""Replicated simulation experiments: MAE and C-index sweeps, bias checks
against the closed-form naive bias, and bootstrap power analysis.

Every experiment is a pure function of its config: replicate ``r`` draws
from ``numpy.random.default_rng(base_seed + r)``.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from . import theory
from .data import DegenerateEstimationError, Method, RctDataset, ScoreSet, make_nuisance
from .dgp import (DgpConfig, SyntheticPool, expected_auc, gen_model_spectrum, gen_pool,
                  subsample_rct, true_auc, with_delta)
from .estimators import ArmCache, NpwConfig, batch_estimate, estimate
from .metrics import TiePolicy, as_tie, c_index, empirical_cdf
from .nuisance import CrossFitConfig, LearnerConfig, cross_fit_nuisance, noisy_oracle

log = logging.getLogger(__name__)

DEFAULT_METHODS = (Method.STANDARD, Method.NAIVE, Method.NPW)
DEFAULT_TRAINING_SIZES = tuple(range(100, 1501, 100))


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (TiePolicy, Method)):
        return obj.value
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@dataclass(frozen=True)
class SweepConfig:
    dgp: DgpConfig = field(default_factory=DgpConfig)
    n_rct: int = 200
    replications: int = 100
    ate_grid: tuple = (0.2,)
    noise_grid: tuple = (0.01,)
    nuisance_mode: str = "oracle_noisy"
    estimator_set: tuple = DEFAULT_METHODS
    tie: TiePolicy = TiePolicy.STRICT
    base_seed: int = 0
    training_sizes: tuple = DEFAULT_TRAINING_SIZES
    model_seed: int = 0
    folds: int = 5
    tau_form: str = "pairwise"
    redraw_outcomes: bool = False
    truth: str = "pool_labels"
    ci_level: float = 0.95
    ci_draws: int = 1000

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not self.ate_grid or not self.noise_grid:
            raise ValueError("grids must be non-empty")
        if self.nuisance_mode not in ("oracle_noisy", "cross_fit"):
            raise ValueError(f"unknown nuisance mode {self.nuisance_mode!r}")
        if self.truth not in ("pool_labels", "expected"):
            raise ValueError(f"unknown truth {self.truth!r}")
        object.__setattr__(self, "tie", as_tie(self.tie))
        object.__setattr__(self, "estimator_set",
                           tuple(Method(m) for m in self.estimator_set))

    @property
    def npw(self) -> NpwConfig:
        return NpwConfig(tie=self.tie, tau_form=self.tau_form)


@dataclass(frozen=True)
class PowerConfig:
    n_grid: tuple = (100, 200, 400, 800)
    bootstrap_samples: int = 1000
    repetitions: int = 100
    significance: float = 0.05
    base_seed: int = 0
    pi: float = 0.5
    nuisance_mode: str = "oracle_noisy"
    noise_variance: float = 0.0
    folds: int = 5
    stratified: bool = False
    redraw_outcomes: bool = False
    tie: TiePolicy = TiePolicy.STRICT
    tau_form: str = "pairwise"

    def __post_init__(self):
        if self.bootstrap_samples < 100:
            raise ValueError("bootstrap_samples must be at least 100")
        if not 0.0 < self.significance < 1.0:
            raise ValueError("significance must lie in (0, 1)")
        if self.nuisance_mode not in ("oracle_noisy", "cross_fit", "provided"):
            raise ValueError(f"unknown nuisance mode {self.nuisance_mode!r}")
        object.__setattr__(self, "tie", as_tie(self.tie))


@dataclass
class ReportRow:
    setting: dict
    method: str
    mean: float
    ci_lo: float
    ci_hi: float
    used: int
    skipped: int
    extra: dict = field(default_factory=dict)

    @property
    def available(self) -> bool:
        return self.used > 0


@dataclass
class ExperimentReport:
    metric_name: str
    rows: list
    provenance: dict = field(default_factory=dict)

    def row(self, method, **setting) -> ReportRow:
        method = Method(method).value if not isinstance(method, str) else method
        for r in self.rows:
            if r.method == method and all(r.setting.get(k) == v for k, v in setting.items()):
                return r
        raise KeyError(f"no row for {method} with {setting}")

    def series(self, method, key) -> list:
        method = Method(method).value
        return [(r.setting[key], r.mean) for r in self.rows if r.method == method]


def bootstrap_ci(values, level: float = 0.95, draws: int = 1000,
                 rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("need at least one value")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if np.all(v == v[0]):
        return float(v[0]), float(v[0])
    rng = np.random.default_rng(0) if rng is None else rng
    means = v[rng.integers(0, len(v), size=(draws, len(v)))].mean(axis=1)
    lo, hi = np.quantile(means, [(1 - level) / 2, 1 - (1 - level) / 2])
    m = v.mean()
    return float(min(lo, m)), float(max(hi, m))


def _summarise(values, setting, method, total, config_level, config_draws, seed):
    vals = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
    skipped = total - len(vals)
    if len(vals) == 0:
        return ReportRow(dict(setting), Method(method).value, float("nan"), float("nan"),
                         float("nan"), 0, skipped, {"unavailable": True})
    lo, hi = bootstrap_ci(vals, config_level, config_draws, np.random.default_rng(seed))
    return ReportRow(dict(setting), Method(method).value, float(vals.mean()), lo, hi,
                     len(vals), skipped)


def _nuisance_for(config: SweepConfig, pool: SyntheticPool, dataset: RctDataset, v: float,
                  rng: np.random.Generator, seed: int):
    if config.nuisance_mode == "cross_fit":
        return cross_fit_nuisance(dataset, CrossFitConfig(config.folds, LearnerConfig(), seed))
    idx = dataset.source_index
    return noisy_oracle(pool.omega_true[idx], pool.tau_effective[idx], v, rng, dataset)


def _model_truth(config: SweepConfig, pool: SyntheticPool, model: ScoreSet) -> float:
    if config.truth == "expected":
        return expected_auc(pool, model.scores, config.tie)
    return model.true_auc if model.true_auc is not None else true_auc(pool, model.scores,
                                                                        config.tie)


def _pool_and_models(config: SweepConfig, delta: float):
    dgp = with_delta(config.dgp, delta)
    pool = gen_pool(dgp)
    models = gen_model_spectrum(pool, config.training_sizes,
                                np.random.default_rng([dgp.seed, config.model_seed]),
                                tie=config.tie)
    return pool, models


def _replicate_estimates(config, pool, models, rng, seed, noise_grid):
    """One replicate: {v: {method: array over models}} (NaN where degenerate)."""
    dataset = subsample_rct(pool, config.n_rct, config.dgp.pi, rng, config.redraw_outcomes)
    idx = dataset.source_index
    out = {}
    for v in noise_grid:
        nuisance = None
        if any(m in (Method.NPW, Method.NPW_OMEGA_ONLY, Method.NPW_TAU_ONLY)
               for m in config.estimator_set):
            try:
                nuisance = _nuisance_for(config, pool, dataset, v, rng, seed)
            except ValueError as exc:
                log.info("replicate seed %d: nuisance fit failed (%s)", seed, exc)
        per_method = {}
        for method in config.estimator_set:
            vals = np.full(len(models), np.nan)
            for k, model in enumerate(models):
                try:
                    vals[k] = estimate(method, dataset, model.scores[idx], nuisance,
                                       config.npw).value
                except (DegenerateEstimationError, ValueError):
                    pass
            per_method[method] = vals
        out[v] = per_method
    return out


def run_mae_sweep(config: SweepConfig, pool: SyntheticPool | None = None,
                  models: list | None = None) -> ExperimentReport:
    """Per (model, noise level): MAE of each estimator against the model's true AUROC."""
    delta = config.ate_grid[0]
    if pool is None or models is None:
        pool, models = _pool_and_models(config, delta)
    truths = np.array([_model_truth(config, pool, m) for m in models])
    errors = {(v, m): [] for v in config.noise_grid for m in config.estimator_set}
    for r in range(config.replications):
        seed = config.base_seed + r
        est = _replicate_estimates(config, pool, models, np.random.default_rng(seed), seed,
                                   config.noise_grid)
        for v, per_method in est.items():
            for m, vals in per_method.items():
                errors[(v, m)].append(np.abs(vals - truths))
    rows = []
    for (v, m), errs in errors.items():
        errs = np.array(errs)  # replicates x models
        for k, model in enumerate(models):
            setting = {"model": model.model_name, "true_auc": float(truths[k]), "noise": v,
                       "ate": delta}
            rows.append(_summarise(errs[:, k], setting, m, config.replications,
                                   config.ci_level, config.ci_draws, config.base_seed + k))
    return ExperimentReport("mae", rows, _provenance(config, pool))


def run_cindex_sweep(config: SweepConfig) -> ExperimentReport:
    """Per (ATE, noise level): C-index of each estimator's model ranking."""
    rows = []
    spreads = {}
    for delta in config.ate_grid:
        pool, models = _pool_and_models(config, delta)
        if len(models) < 5:
            raise ValueError("C-index sweeps need at least 5 models")
        truths = np.array([_model_truth(config, pool, m) for m in models])
        spreads[str(delta)] = [float(truths.min()), float(truths.max())]
        scores = {(v, m): [] for v in config.noise_grid for m in config.estimator_set}
        for r in range(config.replications):
            seed = config.base_seed + r
            est = _replicate_estimates(config, pool, models, np.random.default_rng(seed), seed,
                                       config.noise_grid)
            for v, per_method in est.items():
                for m, vals in per_method.items():
                    ok = np.isfinite(vals)
                    try:
                        value = c_index(vals[ok], truths[ok]) if ok.sum() >= 2 else np.nan
                    except ValueError:
                        value = np.nan
                    # a ranking that lost models is not comparable to full ones
                    scores[(v, m)].append(value if ok.all() else np.nan)
        for (v, m), vals in scores.items():
            rows.append(_summarise(vals, {"ate": delta, "noise": v}, m, config.replications,
                                   config.ci_level, config.ci_draws, config.base_seed))
    prov = _provenance(config, None)
    prov["true_auc_range"] = spreads
    return ExperimentReport("c_index", rows, prov)


def pool_sigma(pool: SyntheticPool, scores, tie=TiePolicy.HALF) -> float:
    """Covariance between the realised CATE and the pool CDF of the scores."""
    s = np.asarray(scores, dtype=float)
    return theory.sigma_f(pool.tau_effective, empirical_cdf(s, s, tie))


def run_bias_check(config: SweepConfig, model: ScoreSet, pool: SyntheticPool | None = None,
                   methods=(Method.NAIVE, Method.NPW)) -> ReportRow:
    """Empirical versus predicted bias of the naive (and NPW) estimators.

    Bias is reported as truth minus replicate mean, the sign convention of
    ``theory.naive_bias``. Outcomes are redrawn per replicate and the truth
    is the label-noise-free pool AUROC, so the oracle nuisances describe the
    data exactly. Oracle noise is the first entry of ``noise_grid``.
    """
    pool = gen_pool(config.dgp) if pool is None else pool
    s = model.scores
    truth = expected_auc(pool, s, config.tie)
    params = pool.population_params(config.dgp.pi)
    sigma = pool_sigma(pool, s)
    diag = theory.bias_diagnostics(params, truth, sigma)
    values = {Method(m): [] for m in methods}
    v = config.noise_grid[0]
    skipped = 0
    for r in range(config.replications):
        rng = np.random.default_rng(config.base_seed + r)
        dataset = subsample_rct(pool, config.n_rct, config.dgp.pi, rng, redraw_outcomes=True)
        idx = dataset.source_index
        nuisance = noisy_oracle(pool.omega_true[idx], pool.tau_effective[idx], v, rng, dataset)
        try:
            got = {m: estimate(m, dataset, s[idx], nuisance, config.npw).value for m in values}
        except DegenerateEstimationError:
            skipped += 1
            continue
        for m, val in got.items():
            values[m].append(val)
    extra = {"truth": truth, "alpha": diag.alpha, "beta": diag.beta, "delta_f": diag.delta_f,
             "sigma_f": diag.sigma_f, "predicted_bias": diag.predicted_bias,
             "mu0": params.mu0, "mu1": params.mu1, "pi": params.pi,
             "clipped_fraction": pool.clipped_fraction}
    for m, vals in values.items():
        vals = np.asarray(vals)
        extra[f"{m.value}_mean"] = float(vals.mean())
        extra[f"{m.value}_bias"] = float(truth - vals.mean())
        extra[f"{m.value}_se"] = float(vals.std(ddof=1) / np.sqrt(len(vals)))
    extra["gap"] = extra["naive_bias"] - diag.predicted_bias if "naive_bias" in extra else None
    used = config.replications - skipped
    lead = Method(methods[0]).value
    se = extra[f"{lead}_se"]
    bias = extra[f"{lead}_bias"]
    return ReportRow({"model": model.model_name, "ate": config.dgp.delta}, lead, bias,
                     bias - 1.96 * se, bias + 1.96 * se, used, skipped, extra)


# --- power ------------------------------------------------------------------

def resample_counts(n: int, draws: int, rng: np.random.Generator,
                    strata: np.ndarray | None = None) -> np.ndarray:
    """Multiplicity matrix (draws, n) of bootstrap resamples of n rows.

    With ``strata`` each stratum is resampled to its own size.
    """
    counts = np.zeros((draws, n))
    groups = [np.arange(n)] if strata is None else [np.flatnonzero(strata == g)
                                                      for g in np.unique(strata)]
    rows = np.arange(draws)[:, None]
    for members in groups:
        if len(members) == 0:
            continue
        pick = members[rng.integers(0, len(members), size=(draws, len(members)))]
        np.add.at(counts, (np.broadcast_to(rows, pick.shape), pick), 1.0)
    return counts


def bootstrap_pvalue(values_a, values_b, max_invalid_fraction=0.5) -> float:
    """Share of valid resamples where model a scores at least as high as model b.

    NaN when more than ``max_invalid_fraction`` of resamples are degenerate.
    """
    a = np.asarray(values_a, dtype=float)
    b = np.asarray(values_b, dtype=float)
    ok = np.isfinite(a) & np.isfinite(b)
    if ok.mean() < 1 - max_invalid_fraction:
        return float("nan")
    return float(np.mean(a[ok] >= b[ok]))


def _draw_power_sample(source, scores_a, scores_b, n, config: PowerConfig, rng, nuisance):
    if isinstance(source, SyntheticPool):
        dataset = subsample_rct(source, n, config.pi, rng, config.redraw_outcomes)
        idx = dataset.source_index
        if config.nuisance_mode == "oracle_noisy":
            nu = noisy_oracle(source.omega_true[idx], source.tau_effective[idx],
                              config.noise_variance, rng, dataset)
        else:
            nu = None
    else:
        if n > source.n:
            raise ValueError(f"n={n} exceeds dataset size {source.n}")
        idx = np.sort(rng.choice(source.n, size=n, replace=False))
        dataset = source.subset(idx)
        nu = None
        if config.nuisance_mode == "provided":
            if nuisance is None:
                raise ValueError("nuisance_mode 'provided' needs nuisance estimates")
            nu = make_nuisance(nuisance.omega_hat[idx], nuisance.tau_hat[idx], dataset)
    if config.nuisance_mode == "cross_fit":
        nu = cross_fit_nuisance(dataset, CrossFitConfig(config.folds, LearnerConfig(),
                                                        int(rng.integers(2**31))))
    return dataset, np.asarray(scores_a)[idx], np.asarray(scores_b)[idx], nu


def run_power(source, scores_a, scores_b, config: PowerConfig, methods=DEFAULT_METHODS,
              nuisance=None) -> ExperimentReport:
    """Bootstrap power to detect that model b beats model a.

    ``source`` is a SyntheticPool (each repetition draws a fresh trial) or an
    RctDataset (each repetition draws n rows without replacement). Nuisances
    are computed once per repetition and carried through the resamples.
    """
    sa = np.asarray(scores_a.scores if isinstance(scores_a, ScoreSet) else scores_a, float)
    sb = np.asarray(scores_b.scores if isinstance(scores_b, ScoreSet) else scores_b, float)
    if sa.shape != sb.shape:
        raise ValueError("score sets must cover the same samples")
    methods = tuple(Method(m) for m in methods)
    npw = NpwConfig(tie=config.tie, tau_form=config.tau_form)
    rows = []
    for n in config.n_grid:
        pvalues = {m: [] for m in methods}
        for r in range(config.repetitions):
            rng = np.random.default_rng([config.base_seed, int(n), r])
            try:
                dataset, a, b, nu = _draw_power_sample(source, sa, sb, n, config, rng, nuisance)
            except ValueError as exc:
                log.info("power n=%d rep %d: %s", n, r, exc)
                for m in methods:
                    pvalues[m].append(np.nan)
                continue
            strata = dataset.treatment if config.stratified else None
            counts = resample_counts(dataset.n, config.bootstrap_samples, rng, strata)
            cache_a = ArmCache(dataset, a, nu)
            cache_b = ArmCache(dataset, b, nu)
            for m in methods:
                if m in (Method.NPW, Method.NPW_OMEGA_ONLY, Method.NPW_TAU_ONLY) and nu is None:
                    raise ValueError(f"method {m.value} needs nuisance estimates")
                va = batch_estimate(m, cache_a, counts, npw)
                vb = batch_estimate(m, cache_b, counts, npw)
                pvalues[m].append(bootstrap_pvalue(va, vb))
        for m in methods:
            p = np.asarray(pvalues[m])
            ok = np.isfinite(p)
            reject = (p[ok] < config.significance).astype(float)
            setting = {"n": int(n)}
            if ok.sum() == 0:
                rows.append(ReportRow(setting, m.value, float("nan"), float("nan"), float("nan"),
                                      0, len(p), {"pvalues": p.tolist()}))
                continue
            lo, hi = bootstrap_ci(reject, 0.95, 1000, np.random.default_rng(config.base_seed))
            rows.append(ReportRow(setting, m.value, float(reject.mean()), lo, hi, int(ok.sum()),
                                  int((~ok).sum()), {"pvalues": p.tolist()}))
    prov = {"config": _jsonable(config), "methods": [m.value for m in methods]}
    return ExperimentReport("power", rows, prov)


def power_at(report: ExperimentReport, method, n, significance: float) -> float:
    """Recompute power for one row at another significance level."""
    p = np.asarray(report.row(method, n=n).extra["pvalues"], dtype=float)
    p = p[np.isfinite(p)]
    return float(np.mean(p < significance))


def smallest_n_reaching(report: ExperimentReport, method, target=0.8):
    """Smallest n in the report whose power reaches ``target``, or None."""
    hits = [n for n, power in sorted(report.series(method, "n")) if power >= target]
    return hits[0] if hits else None


def _provenance(config, pool):
    prov = {"config": _jsonable(config)}
    if pool is not None:
        prov["clipped_fraction"] = pool.clipped_fraction
    prov["protocol_notes"] = [
        "models are L2 logistic regressions (not gradient-boosted trees)",
        "tau path uses the %s form" % getattr(config, "tau_form", "pairwise"),
        "population plug-ins: mu1 = treated outcome rate, tau_bar = mean tau_hat over treated, "
        "mu0 = mu1 - tau_bar",
    ]
    return prov
