"""Synthetic trial populations with known nuisances and potential outcomes.

Features are standard normal. The baseline risk is omega(x) = sigmoid(w_y x)
and the treatment effect is

    tau(x) = sigmoid(w_tau x) * g(x) * delta / mean_j[sigmoid(w_tau x_j) * g(x_j)]

with g(x) = 1 - w_y x (``tau_form="linear"``, the default) or
g(x) = 1 - sigmoid(w_y x) (``tau_form="sigmoid"``). The normalisation makes
the pool mean of tau exactly ``delta``; omega + tau is then clipped into
[eps, 1 - eps] before the treated potential outcome is drawn, so the effect
the outcomes actually carry is ``tau_effective``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import EPS, RctDataset, ScoreSet
from .metrics import TiePolicy, labelled_auc, signed_weighted_auc
from .nuisance import LearnerConfig, fit_logistic, sigmoid
from .theory import PopulationParams

TAU_FORMS = ("linear", "sigmoid")


@dataclass(frozen=True)
class DgpConfig:
    dim: int = 20
    pool_size: int = 100_000
    delta: float = 0.2
    pi: float = 0.5
    w_y_density: float = 0.4
    w_tau_support: tuple = (0.0, 0.1, 0.2, 0.3, 0.4)
    w_tau_probs: tuple = (0.8, 0.05, 0.05, 0.05, 0.05)
    prob_clip: float = EPS
    seed: int = 0
    tau_form: str = "linear"

    def __post_init__(self):
        if not -1.0 <= self.delta <= 1.0:
            raise ValueError(f"delta={self.delta} outside [-1, 1]")
        if len(self.w_tau_support) != len(self.w_tau_probs):
            raise ValueError("w_tau support and probabilities differ in length")
        if not np.isclose(sum(self.w_tau_probs), 1.0):
            raise ValueError("w_tau probabilities must sum to 1")
        if self.tau_form not in TAU_FORMS:
            raise ValueError(f"tau_form must be one of {TAU_FORMS}")
        if self.dim < 1 or self.pool_size < 2:
            raise ValueError("dim and pool_size must be positive")


@dataclass(frozen=True)
class SyntheticPool:
    features: np.ndarray
    omega_true: np.ndarray
    tau_true: np.ndarray
    tau_effective: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    assignment: np.ndarray
    w_y: np.ndarray
    w_tau: np.ndarray
    clipped_fraction: float
    config: DgpConfig = field(default_factory=DgpConfig)

    @property
    def size(self) -> int:
        return len(self.y0)

    @property
    def treated_prob(self) -> np.ndarray:
        eps = self.config.prob_clip
        return np.clip(self.omega_true + self.tau_effective, eps, 1 - eps)

    def population_params(self, pi: float | None = None) -> PopulationParams:
        pi = self.config.pi if pi is None else pi
        return PopulationParams(pi, float(self.omega_true.mean()), float(self.treated_prob.mean()))


def gen_weights(config: DgpConfig, rng: np.random.Generator):
    n_active = int(round(config.w_y_density * config.dim))
    w_y = np.zeros(config.dim)
    active = rng.choice(config.dim, size=n_active, replace=False)
    w_y[np.sort(active)] = rng.standard_normal(n_active)
    w_tau = rng.choice(np.asarray(config.w_tau_support, dtype=float), size=config.dim,
                       p=np.asarray(config.w_tau_probs, dtype=float))
    return w_y, w_tau


def gen_pool(config: DgpConfig | None = None, rng: np.random.Generator | None = None,
             max_redraws: int = 100) -> SyntheticPool:
    """Draw a pool; weights are redrawn while the tau normaliser is degenerate."""
    config = config or DgpConfig()
    rng = np.random.default_rng(config.seed) if rng is None else rng
    eps = config.prob_clip
    for _ in range(max_redraws):
        w_y, w_tau = gen_weights(config, rng)
        x = rng.standard_normal((config.pool_size, config.dim))
        lin_y = x @ w_y
        omega_raw = sigmoid(lin_y)
        g = 1.0 - lin_y if config.tau_form == "linear" else 1.0 - omega_raw
        shape = sigmoid(x @ w_tau) * g
        norm = shape.mean()
        if abs(norm) > 1e-9:
            break
    else:
        raise ValueError("degenerate tau normalizer")
    tau = shape * config.delta / norm
    omega = np.clip(omega_raw, eps, 1 - eps)
    p1_raw = omega + tau
    p1 = np.clip(p1_raw, eps, 1 - eps)
    clipped = float(np.mean((p1_raw != p1) | (omega_raw != omega)))
    u0 = rng.random(config.pool_size)
    u1 = rng.random(config.pool_size)
    assignment = (rng.random(config.pool_size) < config.pi).astype(np.int8)
    return SyntheticPool(
        features=x, omega_true=omega, tau_true=tau, tau_effective=p1 - omega,
        y0=(u0 < omega).astype(np.int8), y1=(u1 < p1).astype(np.int8),
        assignment=assignment, w_y=w_y, w_tau=w_tau, clipped_fraction=clipped,
        config=config)


def true_auc(pool: SyntheticPool, scores, tie=TiePolicy.STRICT,
             control_only: bool = False) -> float:
    """AUROC on the untreated potential outcome y0.

    Uses the whole pool by default; ``control_only`` restricts to the rows the
    pool assigned to control.
    """
    s = np.asarray(scores.scores if isinstance(scores, ScoreSet) else scores, dtype=float)
    if control_only:
        mask = pool.assignment == 0
        return labelled_auc(s[mask], pool.y0[mask], tie)
    return labelled_auc(s, pool.y0, tie)


def expected_auc(pool: SyntheticPool, scores, tie=TiePolicy.STRICT, treated=False) -> float:
    """Label-noise-free population AUROC over the pool's feature distribution.

    Pairs are weighted by P(i positive) * P(j negative) for i != j, using the
    untreated risk (or the treated risk with ``treated``).
    """
    s = np.asarray(scores.scores if isinstance(scores, ScoreSet) else scores, dtype=float)
    p = pool.treated_prob if treated else pool.omega_true
    return signed_weighted_auc(s, p, 1.0 - p, tie)


def subsample_rct(pool: SyntheticPool, n: int, pi: float, rng: np.random.Generator,
                  redraw_outcomes: bool = False) -> RctDataset:
    """Draw n pool rows without replacement and randomise treatment.

    Observed outcomes are the stored potential outcomes; with
    ``redraw_outcomes`` they are fresh Bernoulli draws from the arm's outcome
    probability instead.
    """
    if n > pool.size:
        raise ValueError(f"n={n} exceeds pool size {pool.size}")
    idx = rng.choice(pool.size, size=n, replace=False)
    t = (rng.random(n) < pi).astype(np.int8)
    if redraw_outcomes:
        prob = np.where(t == 1, pool.treated_prob[idx], pool.omega_true[idx])
        y = (rng.random(n) < prob).astype(np.int8)
    else:
        y = np.where(t == 1, pool.y1[idx], pool.y0[idx])
    return RctDataset(pool.features[idx], y, t, pi, source_index=idx)


def gen_model_spectrum(pool: SyntheticPool, training_sizes, rng: np.random.Generator,
                       learner: LearnerConfig | None = None, tie=TiePolicy.STRICT,
                       max_redraws: int = 20) -> list[ScoreSet]:
    """Fit one logistic model per training size on y0 labels and score the pool.

    Scores are the linear predictor (monotone in the probability, without the
    ties that probability clamping would create). Models are returned sorted
    by true AUROC; a model whose true AUROC duplicates an earlier one is refit
    on a fresh sample.
    """
    models = []
    seen = set()
    for size in training_sizes:
        if size > pool.size:
            raise ValueError(f"training size {size} exceeds pool size {pool.size}")
        for _ in range(max_redraws):
            idx = rng.choice(pool.size, size=size, replace=False)
            fit = fit_logistic(pool.features[idx], pool.y0[idx], learner)
            scores = pool.features @ fit.weights + fit.intercept
            flags = []
            if fit.degenerate:
                flags.append("degenerate")
            if not fit.converged:
                flags.append("not_converged")
            try:
                value = true_auc(pool, scores, tie)
            except ValueError:
                value = float("nan")
            if value not in seen or fit.degenerate:
                break
        seen.add(value)
        models.append(ScoreSet(f"logit_n{size}_{len(models)}", scores, value, tuple(flags)))
    return sorted(models, key=lambda m: m.true_auc)


def with_delta(config: DgpConfig, delta: float) -> DgpConfig:
    return replace(config, delta=delta)
