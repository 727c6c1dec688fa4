"""AUROC estimators for randomized trials.

``standard`` uses the control arm only; ``naive`` mixes control and treated
arm AUROCs by the randomization probability; ``all_data`` pools every row;
``npw`` replaces the treated-arm AUROC with a nuisance-weighted estimate of the
no-intervention AUROC, averaged over an omega-weighted path and a CATE
(tau) corrected path.

Every arm-level kernel accepts an optional multiplicity vector (or a
``(B, n)`` matrix of them), so a bootstrap resample is evaluated as a
count-weighted copy of the arm without materialising it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import (EPS, AucEstimate, DegenerateEstimationError, Method, NuisanceEstimates,
                   RctDataset, ScoreSet, plugin_aggregates)
from .metrics import ScoreLayout, TiePolicy, as_tie, empirical_cdf, labelled_auc

TAU_FORMS = ("pairwise", "plugin")
COMBINE_MODES = ("average", "omega_only", "tau_only")


@dataclass(frozen=True)
class NpwConfig:
    """How the treated-arm alternative estimate is formed.

    ``tau_form="pairwise"`` replaces every expectation in the CATE-corrected
    closed form by its off-diagonal pair average (each term then has exactly
    the right expectation). ``"plugin"`` is the literal plug-in version with
    sample means and an in-sample CDF; it carries an O(1/n) bias.
    """

    combine: str = "average"
    tie: TiePolicy = TiePolicy.STRICT
    clip_tau_path: bool = False
    epsilon: float = EPS
    tau_form: str = "pairwise"

    def __post_init__(self):
        if self.combine not in COMBINE_MODES:
            raise ValueError(f"combine must be one of {COMBINE_MODES}")
        if self.tau_form not in TAU_FORMS:
            raise ValueError(f"tau_form must be one of {TAU_FORMS}")
        object.__setattr__(self, "tie", as_tie(self.tie))


def _score_vector(scores) -> np.ndarray:
    if isinstance(scores, ScoreSet):
        return scores.scores
    return np.asarray(scores, dtype=float)


def _arm_masks(dataset: RctDataset, scores) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s = _score_vector(scores)
    if len(s) != dataset.n:
        raise ValueError(f"score length {len(s)} does not match dataset size {dataset.n}")
    return s, dataset.treatment == 0, dataset.treatment == 1


def _ones_like_counts(n, counts):
    if counts is None:
        return np.ones(n)
    return np.asarray(counts, dtype=float)


# --- arm-level kernels (batched over leading axis of ``counts``) -----------

def arm_auc(layout: ScoreLayout, y, tie, counts=None):
    """Plain AUROC of one arm; NaN where a resample lacks a class."""
    c = _ones_like_counts(layout.n, counts)
    a = c * y
    b = c * (1.0 - y)
    denom = a.sum(axis=-1) * b.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, layout.pair_sum(a, b, tie) / np.where(denom > 0, denom, 1.0),
                        np.nan)


def omega_path(layout: ScoreLayout, omega, tie, counts=None):
    """Omega-weighted AUROC over one arm, self pairs excluded, self-normalised."""
    c = _ones_like_counts(layout.n, counts)
    a = c * omega
    b = c * (1.0 - omega)
    self_pairs = np.sum(c * omega * (1.0 - omega), axis=-1)
    num = layout.pair_sum(a, b, tie) - as_tie(tie).tie_value * self_pairs
    denom = a.sum(axis=-1) * b.sum(axis=-1) - self_pairs
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), np.nan)


def tau_path_terms(layout: ScoreLayout, y, tau, tie, counts=None, form="pairwise",
                   eps=EPS):
    """Numerator and baseline-rate denominator of the CATE-corrected estimate.

    Both come back scaled by the same positive factor, so value = num / den.
    """
    c = _ones_like_counts(layout.n, counts)
    h = as_tie(tie).tie_value
    n1 = c.sum(axis=-1)
    cy, ctau = c * y, c * tau
    sum_y, sum_tau = cy.sum(axis=-1), ctau.sum(axis=-1)
    pos_neg = layout.pair_sum(cy, c * (1.0 - y), tie)
    tau_cdf = layout.pair_sum(ctau, c, tie)
    if form == "pairwise":
        # off-diagonal pair sums; the common 1/(n1(n1-1)) factor cancels
        mu1_tau = sum_y * sum_tau - np.sum(cy * tau, axis=-1)
        tau_sq = sum_tau ** 2 - np.sum(ctau * tau, axis=-1)
        tau_cdf = tau_cdf - h * sum_tau
        z = y - tau
        den = np.sum(c * z, axis=-1) * np.sum(c * (1.0 - z), axis=-1) - np.sum(c * z * (1.0 - z),
                                                                                 axis=-1)
        num = pos_neg + mu1_tau - 0.5 * tau_sq - tau_cdf
        scale = n1 * (n1 - 1.0)
        return num, den, scale
    if form == "plugin":
        with np.errstate(invalid="ignore", divide="ignore"):
            mu1 = sum_y / n1
            tau_bar = sum_tau / n1
        mu0 = np.clip(mu1 - tau_bar, eps, 1 - eps)
        n_sq = n1 ** 2
        num = pos_neg + ((mu1 - 0.5 * tau_bar) * tau_bar) * n_sq - tau_cdf
        den = mu0 * (1.0 - mu0) * n_sq
        return num, den, n_sq
    raise ValueError(f"unknown tau form {form!r}")


def tau_path(layout: ScoreLayout, y, tau, tie, counts=None, form="pairwise", eps=EPS,
             clip=False):
    num, den, scale = tau_path_terms(layout, y, tau, tie, counts, form, eps)
    ok = den > eps ** 2 * scale
    with np.errstate(invalid="ignore", divide="ignore"):
        value = np.where(ok, num / np.where(ok, den, 1.0), np.nan)
    if clip:
        value = np.clip(value, 0.0, 1.0)
    return value


# --- dataset-level estimators ----------------------------------------------

def _arm_value(value, arm_name: str, y) -> float:
    v = float(value)
    if np.isnan(v):
        if not (np.asarray(y) == 1).any():
            missing = "positive"
        elif not (np.asarray(y) == 0).any():
            missing = "negative"
        else:
            missing = "usable"
        raise DegenerateEstimationError(f"{arm_name} arm has no {missing} outcomes")
    return v


def _counts(dataset: RctDataset):
    nt = int(dataset.treatment.sum())
    return dataset.n - nt, nt


def _arm_auc_value(dataset, s, mask, tie, arm_name):
    y = dataset.outcome[mask]
    if len(y) == 0:
        raise DegenerateEstimationError(f"{arm_name} arm is empty")
    return _arm_value(arm_auc(ScoreLayout(s[mask]), y, tie), arm_name, y)


def auc_standard(dataset: RctDataset, scores, tie=TiePolicy.STRICT) -> AucEstimate:
    s, control, _ = _arm_masks(dataset, scores)
    value = _arm_auc_value(dataset, s, control, tie, "control")
    return AucEstimate(Method.STANDARD, value, *_counts(dataset))


def auc_treated(dataset: RctDataset, scores, tie=TiePolicy.STRICT) -> AucEstimate:
    s, _, treated = _arm_masks(dataset, scores)
    value = _arm_auc_value(dataset, s, treated, tie, "treated")
    return AucEstimate(Method.TREATED, value, *_counts(dataset))


def auc_naive(dataset: RctDataset, scores, tie=TiePolicy.STRICT) -> AucEstimate:
    pi = dataset.randomization_prob
    std = auc_standard(dataset, scores, tie).value if pi < 1 else 0.0
    trt = auc_treated(dataset, scores, tie).value if pi > 0 else 0.0
    value = (1 - pi) * std + pi * trt
    return AucEstimate(Method.NAIVE, value, *_counts(dataset),
                       diagnostics={"auc_control": std, "auc_treated": trt})


def auc_all(dataset: RctDataset, scores, tie=TiePolicy.STRICT) -> AucEstimate:
    s, _, _ = _arm_masks(dataset, scores)
    try:
        value = labelled_auc(s, dataset.outcome, tie)
    except DegenerateEstimationError as exc:
        raise DegenerateEstimationError(f"pooled data: {exc}") from None
    return AucEstimate(Method.ALL_DATA, value, *_counts(dataset))


def _treated_nuisance(dataset: RctDataset, nuisance: NuisanceEstimates):
    rows = np.flatnonzero(dataset.treatment == 1)
    if len(rows) == 0:
        raise DegenerateEstimationError("treated arm is empty")
    if nuisance.full_length and len(nuisance.omega_hat) != dataset.n:
        raise ValueError("full-length nuisance vectors do not match the dataset")
    omega, tau = nuisance.for_rows(rows)
    return rows, omega, tau


def auc_npw_omega(dataset: RctDataset, scores, nuisance: NuisanceEstimates,
                  tie=TiePolicy.STRICT, epsilon=EPS) -> AucEstimate:
    """Treated arm reweighted by omega_hat (positives) and 1 - omega_hat (negatives)."""
    s, _, _ = _arm_masks(dataset, scores)
    rows, omega, _ = _treated_nuisance(dataset, nuisance)
    omega = np.clip(omega, epsilon, 1 - epsilon)
    value = float(omega_path(ScoreLayout(s[rows]), omega, tie))
    if np.isnan(value):
        raise DegenerateEstimationError("degenerate weighting")
    return AucEstimate(Method.NPW_OMEGA_ONLY, value, *_counts(dataset))


def auc_npw_tau(dataset: RctDataset, scores, nuisance: NuisanceEstimates,
                tie=TiePolicy.STRICT, form="pairwise", clip=False,
                epsilon=EPS) -> AucEstimate:
    """CATE-corrected treated-arm estimate; may leave [0, 1] unless ``clip``."""
    s, _, _ = _arm_masks(dataset, scores)
    rows, _, tau = _treated_nuisance(dataset, nuisance)
    y = dataset.outcome[rows]
    if y.min() == y.max():
        missing = "negative" if y[0] == 1 else "positive"
        raise DegenerateEstimationError(f"treated arm has no {missing} outcomes")
    value = float(tau_path(ScoreLayout(s[rows]), y, tau, tie, form=form, eps=epsilon,
                           clip=clip))
    if np.isnan(value):
        raise DegenerateEstimationError("degenerate baseline rate")
    mu1, mu0, tau_bar = plugin_aggregates(y, tau, epsilon)
    return AucEstimate(Method.NPW_TAU_ONLY, value, *_counts(dataset),
                       diagnostics={"mu1_hat": mu1, "mu0_hat": mu0, "tau_bar_hat": tau_bar,
                                    "tau_form": form})


def auc_npw(dataset: RctDataset, scores, nuisance: NuisanceEstimates,
            config: NpwConfig | None = None) -> AucEstimate:
    config = config or NpwConfig()
    pi = dataset.randomization_prob
    std = auc_standard(dataset, scores, config.tie).value if pi < 1 else 0.0
    diagnostics = {"auc_control": std, "combine": config.combine}
    if pi == 0:
        return AucEstimate(Method.NPW, std, *_counts(dataset), diagnostics=diagnostics)
    paths = []
    if config.combine in ("average", "omega_only"):
        omega_value = auc_npw_omega(dataset, scores, nuisance, config.tie, config.epsilon).value
        diagnostics["auc_omega_path"] = omega_value
        paths.append(omega_value)
    if config.combine in ("average", "tau_only"):
        tau_est = auc_npw_tau(dataset, scores, nuisance, config.tie, config.tau_form,
                              config.clip_tau_path, config.epsilon)
        diagnostics["auc_tau_path"] = tau_est.value
        diagnostics.update(tau_est.diagnostics)
        paths.append(tau_est.value)
    alt = float(np.mean(paths))
    diagnostics["auc_alt"] = alt
    value = (1 - pi) * std + pi * alt
    method = {"average": Method.NPW, "omega_only": Method.NPW_OMEGA_ONLY,
              "tau_only": Method.NPW_TAU_ONLY}[config.combine]
    return AucEstimate(method, value, *_counts(dataset), diagnostics=diagnostics)


NEEDS_NUISANCE = {Method.NPW, Method.NPW_OMEGA_ONLY, Method.NPW_TAU_ONLY}


def estimate(method, dataset: RctDataset, scores, nuisance: NuisanceEstimates | None = None,
             config: NpwConfig | None = None) -> AucEstimate:
    """Dispatch to one estimator by name.

    ``npw_omega_only`` and ``npw_tau_only`` are the full mixture
    (1 - pi) * standard + pi * path with a single path.
    """
    method = Method(method)
    config = config or NpwConfig()
    tie = config.tie
    if method in NEEDS_NUISANCE and nuisance is None:
        raise ValueError(f"method {method.value} needs nuisance estimates")
    if method is Method.STANDARD:
        return auc_standard(dataset, scores, tie)
    if method is Method.TREATED:
        return auc_treated(dataset, scores, tie)
    if method is Method.NAIVE:
        return auc_naive(dataset, scores, tie)
    if method is Method.ALL_DATA:
        return auc_all(dataset, scores, tie)
    combine = {Method.NPW: "average", Method.NPW_OMEGA_ONLY: "omega_only",
               Method.NPW_TAU_ONLY: "tau_only"}[method]
    cfg = NpwConfig(combine, tie, config.clip_tau_path, config.epsilon, config.tau_form)
    return auc_npw(dataset, scores, nuisance, cfg)


class ArmCache:
    """Per-arm score layouts for repeated count-weighted evaluation of one dataset."""

    def __init__(self, dataset: RctDataset, scores, nuisance: NuisanceEstimates | None = None):
        s, control, treated = _arm_masks(dataset, scores)
        self.dataset = dataset
        self.control_rows = np.flatnonzero(control)
        self.treated_rows = np.flatnonzero(treated)
        self.control = ScoreLayout(s[control])
        self.treated = ScoreLayout(s[treated])
        self.all = ScoreLayout(s)
        self.y0 = dataset.outcome[control]
        self.y1 = dataset.outcome[treated]
        if nuisance is not None and len(self.treated_rows):
            self.omega1, self.tau1 = nuisance.for_rows(self.treated_rows)
        else:
            self.omega1 = self.tau1 = None


def batch_estimate(method, cache: ArmCache, counts, config: NpwConfig | None = None):
    """Evaluate one estimator on a batch of count-weighted resamples of the dataset.

    ``counts`` has shape ``(B, n)``: the multiplicity of each dataset row in
    each resample. Returns B values, NaN where a resample is degenerate.
    """
    method = Method(method)
    config = config or NpwConfig()
    tie = config.tie
    pi = cache.dataset.randomization_prob
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    c0 = counts[:, cache.control_rows]
    c1 = counts[:, cache.treated_rows]
    if method is Method.ALL_DATA:
        return arm_auc(cache.all, cache.dataset.outcome, tie, counts)
    std = arm_auc(cache.control, cache.y0, tie, c0) if pi < 1 else np.zeros(len(counts))
    if method is Method.STANDARD:
        return std
    if method is Method.TREATED:
        return arm_auc(cache.treated, cache.y1, tie, c1)
    if method is Method.NAIVE:
        trt = arm_auc(cache.treated, cache.y1, tie, c1) if pi > 0 else np.zeros(len(counts))
        return (1 - pi) * std + pi * trt
    if pi == 0:
        return std
    if cache.omega1 is None:
        raise ValueError(f"method {method.value} needs nuisance estimates")
    paths = []
    if method in (Method.NPW, Method.NPW_OMEGA_ONLY):
        omega = np.clip(cache.omega1, config.epsilon, 1 - config.epsilon)
        paths.append(omega_path(cache.treated, omega, tie, c1))
    if method in (Method.NPW, Method.NPW_TAU_ONLY):
        value = tau_path(cache.treated, cache.y1, cache.tau1, tie, c1, config.tau_form,
                         config.epsilon, config.clip_tau_path)
        # the tau path needs both classes in the treated resample
        npos = np.sum(c1 * cache.y1, axis=-1)
        nneg = np.sum(c1 * (1 - cache.y1), axis=-1)
        paths.append(np.where((npos > 0) & (nneg > 0), value, np.nan))
    alt = np.mean(paths, axis=0)
    return (1 - pi) * std + pi * alt


def tau_path_reference(scores_treated, y_treated, tau_treated, tie=TiePolicy.STRICT,
                       epsilon=EPS) -> float:
    """Literal plug-in closed form computed term by term (no pair-sum reuse)."""
    s = np.asarray(scores_treated, dtype=float)
    y = np.asarray(y_treated, dtype=float)
    tau = np.asarray(tau_treated, dtype=float)
    mu1, mu0, tau_bar = plugin_aggregates(y, tau, epsilon)
    base = mu0 * (1 - mu0)
    if base < epsilon ** 2:
        raise DegenerateEstimationError("degenerate baseline rate")
    auc1 = labelled_auc(s, y, tie)
    cdf = empirical_cdf(s, s, tie)
    return (mu1 * (1 - mu1) * auc1 + (mu1 - 0.5 * tau_bar) * tau_bar
            - np.mean(tau * cdf)) / base
