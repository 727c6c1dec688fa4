"""Closed-form bias of the naive augmented AUROC and its model-selection consequence.

Sign convention: ``naive_bias`` is the true AUROC minus the expected naive
estimate, so the expected naive estimate is
``(1 - alpha) * theta + 0.5 * alpha + beta * sigma``.

The misselection test uses the inequality

    theta_hat_1 - theta_hat_2 < beta * (sigma_1 - sigma_2)

for models ordered so that theta_hat_1 > theta_hat_2. Under it the model with
the higher expected naive estimate has the lower true AUROC. (The same
statement is sometimes written with the AUROC improvements delta in place of
sigma; the sigma form is the one that follows from the bias expression.)
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .data import BiasDiagnostics


@dataclass(frozen=True)
class PopulationParams:
    pi: float
    mu0: float
    mu1: float

    def __post_init__(self):
        if not (0.0 < self.mu0 < 1.0 and 0.0 < self.mu1 < 1.0):
            raise ValueError(f"mu0={self.mu0}, mu1={self.mu1} must lie strictly inside (0, 1)")
        if not 0.0 <= self.pi <= 1.0:
            raise ValueError(f"pi={self.pi} outside [0, 1]")

    @property
    def tau(self) -> float:
        return self.mu1 - self.mu0


def bias_params(p: PopulationParams) -> tuple[float, float]:
    """Return (alpha, beta) for the naive-bias expression."""
    denom = p.mu1 * (1.0 - p.mu1)
    alpha = p.pi * p.tau * (1.0 - p.mu0 - p.mu1) / denom
    beta = p.pi / denom
    return alpha, beta


def sigma_f(tau_values, cdf_values) -> float:
    """Covariance (denominator n) between per-sample CATE and score-CDF values."""
    tau = np.asarray(tau_values, dtype=float)
    cdf = np.asarray(cdf_values, dtype=float)
    if tau.shape != cdf.shape:
        raise ValueError(f"length mismatch: {tau.shape} vs {cdf.shape}")
    if len(tau) < 2:
        raise ValueError("need at least two samples")
    return float(np.mean((tau - tau.mean()) * (cdf - cdf.mean())))


def naive_bias(p: PopulationParams, delta_f: float, sigma: float) -> float:
    alpha, beta = bias_params(p)
    return alpha * delta_f - beta * sigma


def bias_diagnostics(p: PopulationParams, true_auc: float, sigma: float) -> BiasDiagnostics:
    alpha, beta = bias_params(p)
    return BiasDiagnostics(alpha, beta, true_auc - 0.5, sigma)


def expected_naive(p: PopulationParams, true_auc: float, sigma: float) -> float:
    return true_auc - naive_bias(p, true_auc - 0.5, sigma)


def misselection_condition(theta_hat_1, theta_hat_2, beta, sigma_1, sigma_2) -> bool:
    """True iff the naive estimator provably ranks the truly worse model first."""
    if not theta_hat_1 > theta_hat_2:
        raise ValueError("models must be ordered so that theta_hat_1 > theta_hat_2")
    return bool(theta_hat_1 - theta_hat_2 < beta * (sigma_1 - sigma_2))


def misselection_pairs(models, beta):
    """Yield (i, j, flagged) for every unordered pair with distinct estimates.

    ``i`` is the index of the model with the larger estimate. Pairs with
    equal estimates are never flagged.
    """
    models = list(models)
    for a, b in itertools.combinations(range(len(models)), 2):
        (ta, sa), (tb, sb) = models[a], models[b]
        if ta == tb:
            yield a, b, False
            continue
        hi, lo = (a, b) if ta > tb else (b, a)
        yield hi, lo, misselection_condition(models[hi][0], models[lo][0], beta,
                                             models[hi][1], models[lo][1])


def misselection_rate(models, beta) -> float:
    """Fraction of model pairs meeting the misselection condition.

    ``models`` is a sequence of (theta_hat, sigma) pairs.
    """
    models = list(models)
    if len(models) < 2:
        raise ValueError("need at least two models")
    flags = [flag for _, _, flag in misselection_pairs(models, beta)]
    return sum(flags) / len(flags)


def all_data_mixture(auc_00, auc_11, auc_01, auc_10, pi) -> float:
    """Pooled-data AUROC as a mixture of within- and cross-arm AUROCs.

    ``auc_01`` pairs control positives with treated negatives, ``auc_10``
    treated positives with control negatives.
    """
    if not 0.0 <= pi <= 1.0:
        raise ValueError(f"pi={pi} outside [0, 1]")
    return ((1 - pi) ** 2 * auc_00 + pi ** 2 * auc_11
            + (pi - pi ** 2) * (auc_01 + auc_10))


def all_data_mixture_prevalence(auc_00, auc_11, auc_01, auc_10, pi, mu0, mu1) -> float:
    """Pooled-data AUROC mixture with pair-count weights.

    A pair (positive from arm a, negative from arm b) occurs with probability
    proportional to P(arm a) mu_a * P(arm b) (1 - mu_b). This reduces to
    ``all_data_mixture`` when mu0 == mu1 and is the correct population
    expression otherwise.
    """
    if not 0.0 <= pi <= 1.0:
        raise ValueError(f"pi={pi} outside [0, 1]")
    p = {0: 1.0 - pi, 1: pi}
    mu = {0: mu0, 1: mu1}
    aucs = {(0, 0): auc_00, (1, 1): auc_11, (0, 1): auc_01, (1, 0): auc_10}
    w = {(a, b): p[a] * mu[a] * p[b] * (1.0 - mu[b]) for a, b in aucs}
    total = sum(w.values())
    if total <= 0:
        raise ValueError("no positive-negative pairs have positive probability")
    return sum(w[k] * aucs[k] for k in aucs) / total
